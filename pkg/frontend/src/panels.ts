/**
 * DOM rendering for the explorer panels. Every number shown here traces to a
 * service response or the normalized slider state; no model math happens in
 * the client.
 */
import { AttributeInfo, Sample, TransferResponse } from "./api.js";
import { displayWeights, SessionState } from "./state.js";

export type Role = "source" | "donor";

function pngSrc(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

export function renderOfflineBanner(container: HTMLElement, message: string): void {
  const banner = document.createElement("div");
  banner.className = "offline-banner";
  banner.textContent = message;
  container.replaceChildren(banner);
}

export function renderGallery(
  container: HTMLElement,
  samples: Sample[],
  onPick: (id: number, role: Role) => void,
): void {
  if (samples.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No samples in the catalog.";
    container.replaceChildren(empty);
    return;
  }
  const grid = document.createElement("div");
  grid.className = "gallery-grid";
  for (const sample of samples) {
    const cell = document.createElement("figure");
    cell.className = "gallery-cell";
    cell.dataset.sampleId = String(sample.id);

    const img = document.createElement("img");
    img.src = pngSrc(sample.thumbnail);
    img.alt = `sample ${sample.id}`;
    cell.appendChild(img);

    const badges = document.createElement("figcaption");
    badges.className = "badges";
    for (const [name, cls] of Object.entries(sample.labels)) {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = `${name}: ${cls}`;
      badges.appendChild(badge);
    }
    cell.appendChild(badges);

    for (const role of ["source", "donor"] as const) {
      const button = document.createElement("button");
      button.className = `pick-${role}`;
      button.textContent = `as ${role}`;
      button.addEventListener("click", () => onPick(sample.id, role));
      cell.appendChild(button);
    }
    grid.appendChild(cell);
  }
  container.replaceChildren(grid);
}

export interface Chip {
  attribute: string;
  label: number;
  confidence: number;
}

/** One chip per attribute: argmax class of the returned posterior plus its
 * probability. */
export function chipsFromPrediction(
  predicted: Record<string, number[]>,
): Chip[] {
  return Object.entries(predicted).map(([attribute, pmf]) => {
    let label = 0;
    pmf.forEach((p, i) => {
      if (p > pmf[label]!) label = i;
    });
    return { attribute, label, confidence: pmf[label]! };
  });
}

export function renderTransferResult(
  container: HTMLElement,
  response: TransferResponse,
  onUseAsSource: () => void,
): void {
  const panel = document.createElement("div");
  panel.className = "transfer-result";

  const img = document.createElement("img");
  img.className = "result-image";
  img.src = pngSrc(response.image);
  panel.appendChild(img);

  const chipRow = document.createElement("div");
  chipRow.className = "chips";
  for (const chip of chipsFromPrediction(response.predicted)) {
    const el = document.createElement("span");
    el.className = "chip";
    el.dataset.attribute = chip.attribute;
    el.dataset.label = String(chip.label);
    el.textContent =
      `${chip.attribute}: ${chip.label} (${(chip.confidence * 100).toFixed(0)}%)`;
    chipRow.appendChild(el);
  }
  panel.appendChild(chipRow);

  const reuse = document.createElement("button");
  reuse.className = "use-as-source";
  reuse.textContent = "Use as next source";
  reuse.addEventListener("click", onUseAsSource);
  panel.appendChild(reuse);

  container.replaceChildren(panel);
}

export function renderMixPanel(
  container: HTMLElement,
  state: SessionState,
  onRelease: () => void,
): void {
  const panel = document.createElement("div");
  panel.className = "mix-panel";
  const shown = displayWeights([...state.mixWeights]);

  state.mixComponentIds.forEach((id, i) => {
    const row = document.createElement("label");
    row.className = "mix-row";

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = String(state.mixWeights[i]);
    slider.addEventListener("input", () => {
      state.setMixWeight(i, Number(slider.value));
      renderMixPanel(container, state, onRelease);
    });
    slider.addEventListener("change", onRelease);
    row.appendChild(slider);

    const value = document.createElement("span");
    value.className = "mix-weight";
    value.textContent = `#${id}: ${shown[i]!.toFixed(2)}`;
    row.appendChild(value);
    panel.appendChild(row);
  });

  const sum = document.createElement("div");
  sum.className = "mix-sum";
  sum.textContent = `sum ${shown.reduce((a, b) => a + b, 0).toFixed(2)}`;
  panel.appendChild(sum);
  container.replaceChildren(panel);
}

export function renderInterpolationStrip(
  container: HTMLElement,
  frames: string[],
  state: SessionState,
): void {
  const panel = document.createElement("div");
  panel.className = "interp-panel";

  const img = document.createElement("img");
  img.className = "interp-frame";
  img.src = pngSrc(frames[state.interpolation.position]!);
  panel.appendChild(img);

  const scrubber = document.createElement("input");
  scrubber.type = "range";
  scrubber.className = "interp-scrubber";
  scrubber.min = "0";
  scrubber.max = String(frames.length - 1);
  scrubber.step = "1";
  scrubber.value = String(state.interpolation.position);
  scrubber.addEventListener("input", () => {
    state.scrubTo(Number(scrubber.value));
    renderInterpolationStrip(container, frames, state);
  });
  panel.appendChild(scrubber);

  const marker = document.createElement("div");
  marker.className = "interp-marker";
  const at = state.interpolation.position;
  marker.textContent =
    at === 0 ? "endpoint j" : at === frames.length - 1 ? "endpoint i" : `frame ${at}`;
  panel.appendChild(marker);
  container.replaceChildren(panel);
}
