import { describe, expect, it, vi } from "vitest";

import {
  chipsFromPrediction,
  renderGallery,
  renderInterpolationStrip,
  renderMixPanel,
  renderOfflineBanner,
  renderTransferResult,
} from "../src/panels.js";
import { SessionState } from "../src/state.js";

const PNG = "iVBORw0KGgo="; // placeholder payload; panels never decode it

function container(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

describe("gallery", () => {
  it("shows an empty-state message for an empty catalog", () => {
    const el = container();
    renderGallery(el, [], () => {});
    expect(el.querySelector(".empty-state")?.textContent).toContain("No samples");
  });

  it("renders one badge per attribute with schema names", () => {
    const el = container();
    renderGallery(el, [
      { id: 0, labels: { shape: 1, hue: 3 }, thumbnail: PNG },
    ], () => {});
    const badges = [...el.querySelectorAll(".badge")].map((b) => b.textContent);
    expect(badges).toEqual(["shape: 1", "hue: 3"]);
  });

  it("clicking assigns source or donor role", () => {
    const el = container();
    const picks: [number, string][] = [];
    renderGallery(el, [
      { id: 4, labels: { shape: 0 }, thumbnail: PNG },
    ], (id, role) => picks.push([id, role]));
    (el.querySelector(".pick-source") as HTMLButtonElement).click();
    (el.querySelector(".pick-donor") as HTMLButtonElement).click();
    expect(picks).toEqual([[4, "source"], [4, "donor"]]);
  });
});

describe("transfer result", () => {
  const response = {
    image: PNG,
    predicted: {
      shape: [0.1, 0.7, 0.2],
      hue: [0.05, 0.05, 0.8, 0.1],
    },
  };

  it("chip label is the posterior argmax and confidence its probability", () => {
    const chips = chipsFromPrediction(response.predicted);
    expect(chips).toEqual([
      { attribute: "shape", label: 1, confidence: 0.7 },
      { attribute: "hue", label: 2, confidence: 0.8 },
    ]);
  });

  it("renders one chip per attribute with the confidence percent", () => {
    const el = container();
    renderTransferResult(el, response, () => {});
    const chips = [...el.querySelectorAll(".chip")];
    expect(chips.map((c) => c.textContent)).toEqual([
      "shape: 1 (70%)",
      "hue: 2 (80%)",
    ]);
    expect(chips.map((c) => (c as HTMLElement).dataset.label)).toEqual(["1", "2"]);
  });

  it("offers the result as the next source in one click", () => {
    const el = container();
    const reuse = vi.fn();
    renderTransferResult(el, response, reuse);
    (el.querySelector(".use-as-source") as HTMLButtonElement).click();
    expect(reuse).toHaveBeenCalledOnce();
  });
});

describe("mix panel", () => {
  it("displays weights to 2 decimals and the sum as 1.00", () => {
    const el = container();
    const state = new SessionState();
    [1, 2, 3].forEach((id) => state.addMixComponent(id));
    renderMixPanel(el, state, () => {});
    const shown = [...el.querySelectorAll(".mix-weight")].map((s) => s.textContent);
    expect(shown).toEqual(["#1: 0.34", "#2: 0.33", "#3: 0.33"]);
    expect(el.querySelector(".mix-sum")?.textContent).toBe("sum 1.00");
  });

  it("keeps the displayed sum at 1.00 after a slider drag", () => {
    const el = container();
    const state = new SessionState();
    [1, 2, 3, 4].forEach((id) => state.addMixComponent(id));
    renderMixPanel(el, state, () => {});
    const slider = el.querySelector("input[type=range]") as HTMLInputElement;
    slider.value = "0.77";
    slider.dispatchEvent(new Event("input"));
    expect(el.querySelector(".mix-sum")?.textContent).toBe("sum 1.00");
  });

  it("re-requests only on slider release", () => {
    const el = container();
    const state = new SessionState();
    [1, 2].forEach((id) => state.addMixComponent(id));
    const onRelease = vi.fn();
    renderMixPanel(el, state, onRelease);
    const slider = el.querySelector("input[type=range]") as HTMLInputElement;
    slider.dispatchEvent(new Event("input"));
    expect(onRelease).not.toHaveBeenCalled();
    el.querySelector("input[type=range]")!.dispatchEvent(new Event("change"));
    expect(onRelease).toHaveBeenCalledOnce();
  });
});

describe("interpolation strip", () => {
  it("marks the endpoint frames while scrubbing", () => {
    const el = container();
    const state = new SessionState();
    state.interpolation.steps = 4;
    const frames = [PNG, PNG, PNG, PNG];
    renderInterpolationStrip(el, frames, state);
    expect(el.querySelector(".interp-marker")?.textContent).toBe("endpoint j");
    const scrub = el.querySelector(".interp-scrubber") as HTMLInputElement;
    scrub.value = "3";
    scrub.dispatchEvent(new Event("input"));
    expect(el.querySelector(".interp-marker")?.textContent).toBe("endpoint i");
  });

  it("scrubbing is client-side: the frame list is reused untouched", () => {
    const el = container();
    const state = new SessionState();
    state.interpolation.steps = 3;
    const frames = ["a", "b", "c"];
    renderInterpolationStrip(el, frames, state);
    const scrub = el.querySelector(".interp-scrubber") as HTMLInputElement;
    scrub.value = "1";
    scrub.dispatchEvent(new Event("input"));
    const img = el.querySelector(".interp-frame") as HTMLImageElement;
    expect(img.src).toContain("base64,b");
    expect(frames).toEqual(["a", "b", "c"]);
  });
});

describe("offline banner", () => {
  it("replaces the panel content with the failure message", () => {
    const el = container();
    renderOfflineBanner(el, "service unreachable: fetch failed");
    expect(el.querySelector(".offline-banner")?.textContent).toContain(
      "unreachable",
    );
  });
});
