import { describe, expect, it } from "vitest";
import { SliderPanel, topDims } from "../../src/sliders";

describe("topDims", () => {
  it("ranks by |mu| with ties toward the lower index", () => {
    expect(topDims([0.1, -2.0, 0.5, 2.0], 2)).toEqual([1, 3]);
    expect(topDims([1.0, -1.0, 0.0], 2)).toEqual([0, 1]);
  });

  it("caps at the latent size", () => {
    expect(topDims([0.3, 0.1], 8)).toEqual([0, 1]);
  });
});

describe("SliderPanel", () => {
  const mu = [0.0, 3.0, -1.0, 0.2, 2.5, -0.1, 0.0, 0.0, 4.0, 0.05];

  it("selects the largest dims and builds a summed delta vector", () => {
    const panel = new SliderPanel(10, 3);
    panel.rankFrom(mu);
    expect(panel.dims).toEqual([8, 1, 4]);
    panel.setDelta(8, 0.7);
    panel.setDelta(4, -0.4);
    const vector = panel.deltaVector()!;
    expect(vector).toHaveLength(10);
    expect(vector[8]).toBe(0.7);
    expect(vector[4]).toBe(-0.4);
    expect(vector.filter((v) => v !== 0)).toHaveLength(2);
  });

  it("returns null when every slider is centered", () => {
    const panel = new SliderPanel(10, 3);
    panel.rankFrom(mu);
    expect(panel.deltaVector()).toBeNull();
    panel.setDelta(1, 0.5);
    panel.setDelta(1, 0);
    expect(panel.deltaVector()).toBeNull();
  });

  it("rejects deltas for dims without a slider", () => {
    const panel = new SliderPanel(10, 3);
    panel.rankFrom(mu);
    expect(() => panel.setDelta(0, 1)).toThrow(/no slider/);
  });

  it("resets and re-ranks after a step unless persist is on", () => {
    const panel = new SliderPanel(10, 3);
    panel.rankFrom(mu);
    panel.setDelta(1, 1.5);

    panel.afterStep([9, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    expect(panel.deltaVector()).toBeNull();
    expect(panel.dims[0]).toBe(0);

    panel.rankFrom(mu);
    panel.setDelta(1, 1.5);
    panel.persist = true;
    panel.afterStep([9, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    expect(panel.deltaVector()![1]).toBe(1.5);
    expect(panel.dims).toEqual([8, 1, 4]);
  });

  it("drops deltas for dims that fall out of the ranking", () => {
    const panel = new SliderPanel(10, 2);
    panel.rankFrom(mu); // dims [8, 1]
    panel.setDelta(1, 0.9);
    panel.rankFrom([5, 4, 0, 0, 0, 0, 0, 0, 0, 0]); // dims [0, 1]
    expect(panel.deltaVector()![1]).toBe(0.9);
    panel.rankFrom([5, 0, 4, 0, 0, 0, 0, 0, 0, 0]); // dim 1 gone
    expect(panel.deltaVector()).toBeNull();
  });
});
