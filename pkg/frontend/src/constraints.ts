/** Client-side mirror of the server's specification validator. Advisory
 * only: the service remains the validator of record; this module exists so
 * the form can grey out constraint-violating combinations before submit. */

import type { SpecJson, Violation } from "./types";

export const MNL = 1;
export const MMNL = 2;
export const LC = 3;
export const FAMILY_NAMES: Record<number, string> = { 1: "MNL", 2: "MMNL", 3: "LC" };

export const LINEAR = 1;
export const BOXCOX = 2;
export const LOG = 3;

export const DIST_FIXED = 0;
export const DIST_NORMAL = 1;
export const DIST_LOGNORMAL = 2;

export const ATTRIBUTES = ["Stores", "Transport", "City", "Noise", "Green", "Cost"] as const;
export const INTERACTION_COVARIATES: Record<number, string> = {
  1: "Woman", 2: "Age", 3: "Respcity", 4: "Homeowner", 5: "Carowner",
};
export const MEMBERSHIP_COVARIATES = ["Woman", "Age", "Respcity", "Homeowner", "Carowner", "Job"] as const;

/** Form model: one entry per attribute, index-aligned with ATTRIBUTES. */
export interface SpecForm {
  family: number;
  asc: boolean;
  include: boolean[];
  altSpecific: boolean[];
  transform: number[];
  interaction: number[];
  dist: number[];
  nClass: number;
  membership: boolean[];
}

export function defaultForm(family: number = MNL): SpecForm {
  const form: SpecForm = {
    family,
    asc: true,
    include: Array(6).fill(true),
    altSpecific: Array(6).fill(false),
    transform: Array(6).fill(LINEAR),
    interaction: Array(6).fill(0),
    dist: Array(6).fill(DIST_FIXED),
    nClass: family === LC ? 2 : 0,
    membership: Array(6).fill(false),
  };
  return normalizeForm(form);
}

/** Coerce the form into the nearest family-legal shape after a family or
 * distribution change (e.g. switching to MMNL clears transforms and
 * interactions on random attributes). */
export function normalizeForm(form: SpecForm): SpecForm {
  const f: SpecForm = {
    ...form,
    include: [...form.include],
    altSpecific: [...form.altSpecific],
    transform: [...form.transform],
    interaction: [...form.interaction],
    dist: [...form.dist],
    membership: [...form.membership],
  };
  if (f.family !== LC) {
    f.nClass = 0;
    f.membership = Array(6).fill(false);
  }
  if (f.family === MNL) {
    f.dist = Array(6).fill(DIST_FIXED);
  } else {
    f.asc = true;
    f.include = Array(6).fill(true);
    f.altSpecific = Array(6).fill(false);
    f.transform = Array(6).fill(LINEAR);
  }
  if (f.family === MMNL) {
    let randoms = 0;
    for (let i = 0; i < 6; i++) {
      if (f.dist[i] !== DIST_FIXED) {
        randoms += 1;
        if (randoms > 2) f.dist[i] = DIST_FIXED;
        else f.interaction[i] = 0;
      }
    }
  }
  if (f.family === LC) {
    f.dist = Array(6).fill(DIST_FIXED);
    f.interaction = Array(6).fill(0);
    if (f.nClass !== 2 && f.nClass !== 3) f.nClass = 2;
  }
  return f;
}

export function toSpecJson(form: SpecForm): SpecJson {
  const out: Record<string, number> = { model: form.family, ASC: form.asc ? 1 : 0 };
  for (let i = 0; i < 6; i++) out[`att_${i + 1}`] = form.include[i] ? 1 : 0;
  for (let i = 0; i < 6; i++) out[`s_${i + 1}`] = form.altSpecific[i] ? 1 : 0;
  for (let i = 0; i < 6; i++) out[`t_${i + 1}`] = form.transform[i];
  for (let i = 0; i < 6; i++) out[`int_${i + 1}`] = form.interaction[i];
  for (let i = 0; i < 6; i++) out[`dist_${i + 1}`] = form.dist[i];
  out["n_class"] = form.nClass;
  for (let j = 0; j < 6; j++) out[`covariates_${j + 1}`] = form.membership[j] ? 1 : 0;
  return out as unknown as SpecJson;
}

/** Same constraint names as the service's 422 bodies. */
export function validateSpec(form: SpecForm): Violation[] {
  const v: Violation[] = [];
  if (!(form.family in FAMILY_NAMES)) {
    return [{ constraint: "unknown family", detail: `family code ${form.family} not in 1..3` }];
  }
  for (let i = 0; i < 6; i++) {
    if (![LINEAR, BOXCOX, LOG].includes(form.transform[i])) {
      v.push({ constraint: "unknown transform", detail: `t_${i + 1}=${form.transform[i]}` });
    }
    if (form.interaction[i] < 0 || form.interaction[i] > 5) {
      v.push({ constraint: "unknown interaction", detail: `int_${i + 1}=${form.interaction[i]}` });
    }
    if (![DIST_FIXED, DIST_NORMAL, DIST_LOGNORMAL].includes(form.dist[i])) {
      v.push({ constraint: "unknown distribution", detail: `dist_${i + 1}=${form.dist[i]}` });
    }
    if (form.transform[i] === LOG && ATTRIBUTES[i] === "Cost") {
      v.push({
        constraint: "log of nonpositive attribute",
        detail: "Cost has negative levels and cannot be log-transformed",
      });
    }
  }
  if (v.length) return v;

  if (form.family === MNL) {
    if (form.dist.some((d) => d !== DIST_FIXED)) {
      v.push({ constraint: "no random parameters in MNL" });
    }
    if (form.nClass) v.push({ constraint: "no classes in MNL" });
    return v;
  }

  if (!form.asc) v.push({ constraint: "ASCs required" });
  if (!form.include.every(Boolean)) v.push({ constraint: "all attributes required" });
  if (form.altSpecific.some(Boolean)) v.push({ constraint: "generic coefficients required" });
  if (form.transform.some((t) => t !== LINEAR)) v.push({ constraint: "linear attributes required" });

  if (form.family === MMNL) {
    const nRandom = form.dist.filter((d) => d !== DIST_FIXED).length;
    if (nRandom === 0) v.push({ constraint: "at least one random parameter" });
    if (nRandom > 2) v.push({ constraint: "max two random parameters" });
    for (let i = 0; i < 6; i++) {
      if (form.dist[i] !== DIST_FIXED && form.interaction[i] !== 0) {
        v.push({
          constraint: "random attribute may not interact",
          detail: `${ATTRIBUTES[i]} is random and interacts`,
        });
      }
    }
    if (form.nClass) v.push({ constraint: "no classes in MMNL" });
    return v;
  }

  // LC
  if (form.dist.some((d) => d !== DIST_FIXED)) v.push({ constraint: "no random parameters in LC" });
  if (form.interaction.some((c) => c !== 0)) v.push({ constraint: "no interactions in LC" });
  if (form.nClass !== 2 && form.nClass !== 3) {
    v.push({
      constraint: "up to three latent classes",
      detail: `n_class=${form.nClass}, must be 2 or 3`,
    });
  }
  return v;
}

/** Per-control enabled/disabled flags derived from the current form. */
export interface ControlState {
  ascDisabled: boolean;
  includeDisabled: boolean[];
  altSpecificDisabled: boolean[];
  transformDisabled: boolean[];
  logOptionDisabled: boolean[];
  distDisabled: boolean[];
  interactionDisabled: boolean[];
  nClassDisabled: boolean;
  nClassOptions: number[];
  membershipDisabled: boolean[];
}

export function controlState(form: SpecForm): ControlState {
  const notMnl = form.family !== MNL;
  const nRandom = form.dist.filter((d) => d !== DIST_FIXED).length;
  return {
    ascDisabled: notMnl,
    includeDisabled: Array(6).fill(notMnl),
    altSpecificDisabled: Array(6).fill(notMnl),
    transformDisabled: Array(6).fill(notMnl),
    logOptionDisabled: ATTRIBUTES.map((a) => a === "Cost"),
    distDisabled: ATTRIBUTES.map((_, i) =>
      form.family !== MMNL ||
      (nRandom >= 2 && form.dist[i] === DIST_FIXED)),
    interactionDisabled: ATTRIBUTES.map((_, i) =>
      form.family === LC ||
      (form.family === MMNL && form.dist[i] !== DIST_FIXED)),
    nClassDisabled: form.family !== LC,
    nClassOptions: form.family === LC ? [2, 3] : [],
    membershipDisabled: Array(6).fill(form.family !== LC),
  };
}
