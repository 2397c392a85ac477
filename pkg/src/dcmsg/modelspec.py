"""Model specifications: validation against the per-family constraint sets,
canonical cache keys, and compilation into estimation-ready design structures.

Field encodings mirror the telemetry schema: family 1/2/3 for MNL/MMNL/LC,
transforms 1/2/3 for linear/boxcox/log, interactions 0..5 for
none/woman/age/respcity/homeowner/carowner, distributions 0/1/2 for
fixed/normal/lognormal.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import dataset as dsmod
from .dataset import ALTERNATIVES, ATTRIBUTE_NAMES, ChoiceDataset, attribute_column
from .errors import IncompleteData, InvalidSpec, NonPositiveForLog

MNL, MMNL, LC = 1, 2, 3
FAMILY_NAMES = {MNL: "MNL", MMNL: "MMNL", LC: "LC"}

LINEAR, BOXCOX, LOG = 1, 2, 3

INT_NONE = 0
INTERACTION_COVARIATES = {1: "Woman", 2: "Age", 3: "Respcity", 4: "Homeowner", 5: "Carowner"}

DIST_FIXED, DIST_NORMAL, DIST_LOGNORMAL = 0, 1, 2

#: membership-model covariates, index j = 1..6 in the telemetry schema
MEMBERSHIP_COVARIATES = ("Woman", "Age", "Respcity", "Homeowner", "Carowner", "Job")

#: lognormal coefficients are sign-restricted per attribute
LOGNORMAL_SIGN = {"Stores": -1.0, "Transport": -1.0, "City": -1.0,
                  "Noise": -1.0, "Green": 1.0, "Cost": -1.0}

BOXCOX_BOUNDS = (-2.0, 3.0)

#: dummy levels (non-reference) per covariate, used for interactions and
#: class membership
_COVARIATE_LEVELS = {"Woman": (1.0,), "Homeowner": (1.0,), "Carowner": (1.0,),
                     "Job": (1.0,), "Age": (2.0, 3.0), "Respcity": (2.0, 3.0, 4.0)}


@dataclass(frozen=True)
class ModelSpecification:
    family: int
    asc: bool = True
    include: tuple = (True,) * 6
    alt_specific: tuple = (False,) * 6
    transform: tuple = (LINEAR,) * 6
    interaction: tuple = (INT_NONE,) * 6
    dist: tuple = (DIST_FIXED,) * 6
    n_class: int = 0
    membership: tuple = (False,) * 6

    def __post_init__(self):
        for name in ("include", "alt_specific", "transform", "interaction", "dist",
                     "membership"):
            if len(getattr(self, name)) != 6:
                raise InvalidSpec(f"{name} must have 6 entries")

    # -- telemetry-schema serialization --------------------------------------

    def to_json(self) -> dict:
        out = {"model": self.family, "ASC": int(self.asc)}
        for i in range(6):
            out[f"att_{i + 1}"] = int(self.include[i])
        for i in range(6):
            out[f"s_{i + 1}"] = int(self.alt_specific[i])
        for i in range(6):
            out[f"t_{i + 1}"] = int(self.transform[i])
        for i in range(6):
            out[f"int_{i + 1}"] = int(self.interaction[i])
        for i in range(6):
            out[f"dist_{i + 1}"] = int(self.dist[i])
        out["n_class"] = self.n_class
        for j in range(6):
            out[f"covariates_{j + 1}"] = int(self.membership[j])
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ModelSpecification":
        try:
            return cls(
                family=int(data["model"]),
                asc=bool(int(data["ASC"])),
                include=tuple(bool(int(data[f"att_{i}"])) for i in range(1, 7)),
                alt_specific=tuple(bool(int(data[f"s_{i}"])) for i in range(1, 7)),
                transform=tuple(int(data[f"t_{i}"]) for i in range(1, 7)),
                interaction=tuple(int(data[f"int_{i}"]) for i in range(1, 7)),
                dist=tuple(int(data[f"dist_{i}"]) for i in range(1, 7)),
                n_class=int(data.get("n_class", 0) or 0),
                membership=tuple(bool(int(data.get(f"covariates_{j}", 0) or 0))
                                 for j in range(1, 7)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed specification payload: {exc}")


@dataclass(frozen=True)
class Violation:
    constraint: str
    message: str


def validate_spec(spec: ModelSpecification) -> list[Violation]:
    """Check a specification against its family's constraint set.

    Violations are data, not faults: an empty list means the model is valid.
    """
    v: list[Violation] = []
    if spec.family not in FAMILY_NAMES:
        return [Violation("unknown family", f"family code {spec.family} not in 1..3")]
    for i in range(6):
        if spec.transform[i] not in (LINEAR, BOXCOX, LOG):
            v.append(Violation("unknown transform", f"t_{i+1}={spec.transform[i]}"))
        if spec.interaction[i] not in (INT_NONE, *INTERACTION_COVARIATES):
            v.append(Violation("unknown interaction", f"int_{i+1}={spec.interaction[i]}"))
        if spec.dist[i] not in (DIST_FIXED, DIST_NORMAL, DIST_LOGNORMAL):
            v.append(Violation("unknown distribution", f"dist_{i+1}={spec.dist[i]}"))
        if spec.transform[i] == LOG and ATTRIBUTE_NAMES[i] == "Cost":
            v.append(Violation("log of nonpositive attribute",
                               "Cost has negative levels and cannot be log-transformed"))
    if v:
        return v

    if spec.family == MNL:
        if any(spec.dist[i] != DIST_FIXED for i in range(6)):
            v.append(Violation("no random parameters in MNL",
                               "distributed coefficients require the MMNL family"))
        if spec.n_class:
            v.append(Violation("no classes in MNL", "n_class must be 0 for MNL"))
        return v

    if spec.family == MMNL:
        if not spec.asc:
            v.append(Violation("ASCs required",
                               "alternative-specific constants are considered for all models"))
        if not all(spec.include):
            v.append(Violation("all attributes required",
                               "all attributes are included in the utility function"))
        if any(spec.alt_specific):
            v.append(Violation("generic coefficients required",
                               "attributes are treated generically across alternatives"))
        if any(t != LINEAR for t in spec.transform):
            v.append(Violation("linear attributes required",
                               "transforms are not available for MMNL"))
        n_random = sum(d != DIST_FIXED for d in spec.dist)
        if n_random == 0:
            v.append(Violation("at least one random parameter",
                               "an MMNL specification needs a distributed coefficient"))
        if n_random > 2:
            v.append(Violation("max two random parameters",
                               f"{n_random} random parameters specified"))
        for i in range(6):
            if spec.dist[i] != DIST_FIXED and spec.interaction[i] != INT_NONE:
                v.append(Violation("random attribute may not interact",
                                   f"{ATTRIBUTE_NAMES[i]} is random and interacts"))
        if spec.n_class:
            v.append(Violation("no classes in MMNL", "n_class must be 0 for MMNL"))
        return v

    # LC
    if not spec.asc:
        v.append(Violation("ASCs required",
                           "alternative-specific constants are considered for all models"))
    if not all(spec.include):
        v.append(Violation("all attributes required",
                           "all attributes are included in the utility function"))
    if any(spec.alt_specific):
        v.append(Violation("generic coefficients required",
                           "attributes are treated generically across alternatives"))
    if any(t != LINEAR for t in spec.transform):
        v.append(Violation("linear attributes required",
                           "transforms are not available for LC"))
    if any(d != DIST_FIXED for d in spec.dist):
        v.append(Violation("no random parameters in LC",
                           "distributed coefficients require the MMNL family"))
    if any(i != INT_NONE for i in spec.interaction):
        v.append(Violation("no interactions in LC",
                           "heterogeneity enters through the membership model"))
    if spec.n_class not in (2, 3):
        v.append(Violation("up to three latent classes",
                           f"n_class={spec.n_class}, must be 2 or 3"))
    return v


def canonical_key(spec: ModelSpecification) -> str:
    """Stable digest used as repository cache key."""
    if validate_spec(spec):
        raise InvalidSpec("cannot key an invalid specification")
    payload = json.dumps(spec.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# design compilation


@dataclass
class BoxcoxGroup:
    """One Box-Cox-transformed attribute: a lambda parameter shared by the
    main effect and any interaction terms on the same attribute."""

    lambda_index: int
    x: np.ndarray                  # (rows, 3) raw positive codes
    terms: list                    # [(beta_index, weight (rows, 3)), ...]


@dataclass
class RandomCoefficient:
    name: str
    mu_index: int                  # position of the mean in the parameter vector
    sigma_index: int
    lognormal: bool
    sign: float
    x: np.ndarray                  # (rows, 3) attribute codes


@dataclass
class DesignMatrix:
    """Estimation-ready utility structure for one specification.

    ``x_linear`` holds all terms linear in the parameters; Box-Cox terms are
    kept separate because utility is nonlinear in lambda.  Alternative A is
    the reference: it carries no constant.
    """

    spec: ModelSpecification
    param_names: list
    x_linear: np.ndarray           # (rows, 3, K)
    choice: np.ndarray             # (rows,) 0-based chosen alternative
    respondent: np.ndarray         # (rows,) respondent ids
    individual_index: np.ndarray   # (rows,) 0-based dense individual index
    n_individuals: int
    boxcox: list = field(default_factory=list)
    random_coefs: list = field(default_factory=list)
    # latent class extras
    n_class: int = 0
    k_class: int = 0               # parameters per class block
    membership_z: np.ndarray | None = None   # (n_individuals, M) incl. constant
    membership_names: list = field(default_factory=list)
    bounds: list = field(default_factory=list)  # [(index, lo, hi)]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def n_rows(self) -> int:
        return len(self.choice)


def _interaction_dummies(df, code: int):
    """Yield (suffix, per-row 0/1 vector) for each non-reference level."""
    name = INTERACTION_COVARIATES[code]
    values = df[name].to_numpy(dtype=float)
    for level in _COVARIATE_LEVELS[name]:
        if name in ("Age", "Respcity"):
            suffix = f"{name.lower()}{int(level)}"
        else:
            suffix = name.lower()
        yield suffix, (values == level).astype(float)


def _base_terms(spec: ModelSpecification, df, n_rows):
    """Linear columns and box-cox groups for one utility block (MNL/MMNL/LC
    share this; LC replicates the result per class)."""
    names: list[str] = []
    columns: list[np.ndarray] = []   # each (rows, 3)
    boxcox_parts = []                # (attr_index, x, [(term_offset, weight)])
    random_parts = []                # (attr_index, name, mu_offset)

    if spec.asc:
        for j, alt in enumerate(ALTERNATIVES[1:], start=1):
            col = np.zeros((n_rows, 3))
            col[:, j] = 1.0
            names.append(f"asc_{alt}")
            columns.append(col)

    for i, attr in enumerate(ATTRIBUTE_NAMES):
        if not spec.include[i]:
            continue
        x = np.stack([df[attribute_column(attr, alt)].to_numpy(dtype=float)
                      for alt in ALTERNATIVES], axis=1)
        transform = spec.transform[i]
        if transform == LOG:
            if np.any(x <= 0):
                raise NonPositiveForLog(f"{attr} has nonpositive codes")
            base = np.log(x)
        elif transform == BOXCOX:
            if np.any(x <= 0):
                raise NonPositiveForLog(f"{attr} has nonpositive codes for Box-Cox")
            base = None  # handled via boxcox groups
        else:
            base = x

        lname = attr.lower()
        weights = [("", np.ones(n_rows))]
        if spec.interaction[i] != INT_NONE:
            for suffix, dummy in _interaction_dummies(df, spec.interaction[i]):
                weights.append((f"_x_{suffix}", dummy))

        if spec.alt_specific[i]:
            alt_masks = [(f"_{alt}", j) for j, alt in enumerate(ALTERNATIVES)]
        else:
            alt_masks = [("", None)]

        if transform == BOXCOX:
            terms = []
            for alt_suffix, alt_j in alt_masks:
                for suffix, w in weights:
                    wcol = np.repeat(w[:, None], 3, axis=1)
                    if alt_j is not None:
                        keep = np.zeros((n_rows, 3))
                        keep[:, alt_j] = 1.0
                        wcol = wcol * keep
                    terms.append((f"b_{lname}{alt_suffix}{suffix}", wcol))
            boxcox_parts.append((i, x, terms))
            continue

        for alt_suffix, alt_j in alt_masks:
            for suffix, w in weights:
                col = base * w[:, None]
                if alt_j is not None:
                    keep = np.zeros((n_rows, 3))
                    keep[:, alt_j] = 1.0
                    col = col * keep
                pname = f"b_{lname}{alt_suffix}{suffix}"
                names.append(pname)
                columns.append(col)
                if suffix == "" and alt_j is None and spec.dist[i] != DIST_FIXED:
                    random_parts.append((i, attr, len(names) - 1))
    return names, columns, boxcox_parts, random_parts


def design_matrix(spec: ModelSpecification, ds: ChoiceDataset) -> DesignMatrix:
    """Compile a valid specification against a complete dataset."""
    violations = validate_spec(spec)
    if violations:
        raise InvalidSpec("; ".join(f"{v.constraint}" for v in violations))
    df = ds.df
    if df.isna().any().any():
        raise IncompleteData("dataset contains absent values; handle missing data first")
    if len(df) == 0:
        raise IncompleteData("empty dataset")

    n_rows = len(df)
    respondent = df["ID"].to_numpy()
    _, individual_index = np.unique(respondent, return_inverse=True)
    n_individuals = int(individual_index.max()) + 1
    choice = df["Choice"].to_numpy(dtype=int) - 1

    names, columns, boxcox_parts, random_parts = _base_terms(spec, df, n_rows)

    if spec.family == LC:
        k_class = len(names)
        all_names = []
        for c in range(1, spec.n_class + 1):
            all_names += [f"{nm}_c{c}" for nm in names]
        x_linear = (np.stack(columns, axis=2) if columns
                    else np.zeros((n_rows, 3, 0)))
        # membership design: constant + dummy-coded covariates, per individual
        first_rows = np.unique(individual_index, return_index=True)[1]
        z_cols = [np.ones(n_individuals)]
        z_names = ["const"]
        for j, flag in enumerate(spec.membership):
            if not flag:
                continue
            name = MEMBERSHIP_COVARIATES[j]
            values = df[name].to_numpy(dtype=float)[first_rows]
            for level in _COVARIATE_LEVELS[name]:
                if name in ("Age", "Respcity"):
                    z_names.append(f"{name.lower()}{int(level)}")
                else:
                    z_names.append(name.lower())
                z_cols.append((values == level).astype(float))
        membership_names = []
        for c in range(2, spec.n_class + 1):
            membership_names += [f"pi_{nm}_c{c}" for nm in z_names]
        all_names += membership_names
        return DesignMatrix(
            spec=spec, param_names=all_names, x_linear=x_linear, choice=choice,
            respondent=respondent, individual_index=individual_index,
            n_individuals=n_individuals, n_class=spec.n_class, k_class=k_class,
            membership_z=np.stack(z_cols, axis=1), membership_names=membership_names,
        )

    # MNL / MMNL: append box-cox lambdas after the linear block
    bounds = []
    boxcox_groups = []
    x_linear = np.stack(columns, axis=2) if columns else np.zeros((n_rows, 3, 0))
    k = len(names)
    beta_start = k
    extra_names = []
    extra_terms = []
    for attr_index, x, terms in boxcox_parts:
        group_terms = []
        for pname, w in terms:
            extra_names.append(pname)
            group_terms.append((beta_start + len(extra_names) - 1, w))
        extra_terms.append((attr_index, x, group_terms))
    names += extra_names
    for attr_index, x, group_terms in extra_terms:
        lam_index = len(names)
        names.append(f"lambda_{ATTRIBUTE_NAMES[attr_index].lower()}")
        bounds.append((lam_index, *BOXCOX_BOUNDS))
        boxcox_groups.append(BoxcoxGroup(lam_index, x, group_terms))
    if extra_names:
        # widen the linear matrix with zero columns for box-cox betas/lambdas;
        # their utility contribution is computed from the groups
        pad = np.zeros((n_rows, 3, len(names) - x_linear.shape[2]))
        x_linear = np.concatenate([x_linear, pad], axis=2)

    random_coefs = []
    if spec.family == MMNL:
        for i, attr, mu_index in random_parts:
            sigma_index = len(names)
            names.append(f"sigma_{attr.lower()}")
            x = np.stack([df[attribute_column(attr, alt)].to_numpy(dtype=float)
                          for alt in ALTERNATIVES], axis=1)
            random_coefs.append(RandomCoefficient(
                name=attr, mu_index=mu_index, sigma_index=sigma_index,
                lognormal=(spec.dist[i] == DIST_LOGNORMAL),
                sign=LOGNORMAL_SIGN[attr], x=x))
        pad = np.zeros((n_rows, 3, len(names) - x_linear.shape[2]))
        x_linear = np.concatenate([x_linear, pad], axis=2)

    dm = DesignMatrix(
        spec=spec, param_names=names, x_linear=x_linear, choice=choice,
        respondent=respondent, individual_index=individual_index,
        n_individuals=n_individuals, boxcox=boxcox_groups,
        random_coefs=random_coefs, bounds=bounds,
    )
    _check_identification(dm)
    return dm


def _check_identification(dm: DesignMatrix) -> None:
    """No linear column may vanish after differencing against alternative A."""
    diff = dm.x_linear - dm.x_linear[:, :1, :]
    lam_and_sigma = {g.lambda_index for g in dm.boxcox}
    lam_and_sigma |= {rc.sigma_index for rc in dm.random_coefs}
    bc_betas = {idx for g in dm.boxcox for idx, _ in g.terms}
    for k, name in enumerate(dm.param_names):
        if k in lam_and_sigma or k in bc_betas:
            continue
        if not np.any(diff[:, :, k]):
            raise InvalidSpec(f"parameter {name} drops out after differencing")
