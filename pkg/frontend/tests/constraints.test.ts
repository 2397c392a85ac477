import { describe, expect, it } from "vitest";
import {
  DIST_FIXED,
  DIST_LOGNORMAL,
  DIST_NORMAL,
  LC,
  LOG,
  MMNL,
  MNL,
  controlState,
  defaultForm,
  normalizeForm,
  toSpecJson,
  validateSpec,
} from "../src/constraints";

describe("specification form validation (client mirror)", () => {
  it("default MNL form is valid", () => {
    expect(validateSpec(defaultForm(MNL))).toEqual([]);
  });

  it("MNL with a random coefficient is flagged", () => {
    const form = defaultForm(MNL);
    form.dist[3] = DIST_NORMAL;
    const constraints = validateSpec(form).map((v) => v.constraint);
    expect(constraints).toContain("no random parameters in MNL");
  });

  it("log transform on Cost is flagged", () => {
    const form = defaultForm(MNL);
    form.transform[5] = LOG;
    const constraints = validateSpec(form).map((v) => v.constraint);
    expect(constraints).toContain("log of nonpositive attribute");
  });

  it("MMNL needs at least one and at most two random coefficients", () => {
    const none = defaultForm(MMNL);
    none.dist = Array(6).fill(DIST_FIXED);
    expect(validateSpec(none).map((v) => v.constraint))
      .toContain("at least one random parameter");
    const three = defaultForm(MMNL);
    three.dist = [DIST_NORMAL, DIST_NORMAL, DIST_NORMAL, 0, 0, 0];
    expect(validateSpec(three).map((v) => v.constraint))
      .toContain("max two random parameters");
  });

  it("a random attribute may not carry an interaction", () => {
    const form = defaultForm(MMNL);
    form.dist[3] = DIST_NORMAL;
    form.interaction[3] = 1;
    expect(validateSpec(form).map((v) => v.constraint))
      .toContain("random attribute may not interact");
  });

  it("LC class count is limited, same constraint name as the service", () => {
    const form = defaultForm(LC);
    form.nClass = 4;
    const hit = validateSpec(form).find((v) => v.constraint === "up to three latent classes");
    expect(hit).toBeDefined();
  });

  it("ASCs and all attributes are mandatory outside MNL", () => {
    for (const family of [MMNL, LC]) {
      const form = defaultForm(family);
      if (family === MMNL) form.dist[3] = DIST_NORMAL;
      form.asc = false;
      form.include[0] = false;
      const constraints = validateSpec(form).map((v) => v.constraint);
      expect(constraints).toContain("ASCs required");
      expect(constraints).toContain("all attributes required");
    }
  });
});

describe("control state (greying out before submit)", () => {
  it("MMNL disables the interaction selector on random attributes", () => {
    const form = defaultForm(MMNL);
    form.dist[3] = DIST_NORMAL;       // Noise random
    const state = controlState(form);
    expect(state.interactionDisabled[3]).toBe(true);
    expect(state.interactionDisabled[0]).toBe(false);
  });

  it("a third random coefficient cannot be selected", () => {
    const form = defaultForm(MMNL);
    form.dist[3] = DIST_NORMAL;
    form.dist[5] = DIST_LOGNORMAL;
    const state = controlState(form);
    expect(state.distDisabled[0]).toBe(true);   // Stores still fixed: locked
    expect(state.distDisabled[3]).toBe(false);  // Noise can be reverted
  });

  it("log option is always disabled for Cost", () => {
    expect(controlState(defaultForm(MNL)).logOptionDisabled[5]).toBe(true);
    expect(controlState(defaultForm(MNL)).logOptionDisabled[0]).toBe(false);
  });

  it("class controls only live in the LC family", () => {
    expect(controlState(defaultForm(MNL)).nClassDisabled).toBe(true);
    const lc = controlState(defaultForm(LC));
    expect(lc.nClassDisabled).toBe(false);
    expect(lc.nClassOptions).toEqual([2, 3]);
    expect(lc.membershipDisabled.every((d) => !d)).toBe(true);
  });
});

describe("form normalization and serialization", () => {
  it("switching to MMNL clears transforms and caps random coefficients", () => {
    const form = defaultForm(MNL);
    form.family = MMNL;
    form.transform[1] = LOG;
    form.dist = [DIST_NORMAL, DIST_NORMAL, DIST_NORMAL, 0, 0, 0];
    const fixed = normalizeForm(form);
    expect(fixed.transform.every((t) => t === 1)).toBe(true);
    expect(fixed.dist.filter((d) => d !== DIST_FIXED).length).toBe(2);
    expect(validateSpec(fixed)).toEqual([]);
  });

  it("serializes to the telemetry field layout", () => {
    const json = toSpecJson(defaultForm(LC)) as unknown as Record<string, number>;
    expect(json["model"]).toBe(LC);
    expect(json["ASC"]).toBe(1);
    expect(json["n_class"]).toBe(2);
    for (let i = 1; i <= 6; i++) {
      expect(json[`att_${i}`]).toBe(1);
      expect(json[`s_${i}`]).toBe(0);
      expect(json[`t_${i}`]).toBe(1);
      expect(json[`int_${i}`]).toBe(0);
      expect(json[`dist_${i}`]).toBe(0);
      expect(json[`covariates_${i}`]).toBe(0);
    }
  });
});
