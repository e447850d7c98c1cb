/** Entry point: wires the panels to the client against one base URL. */
import { ApiClient, ServiceError, TransferResponse } from "./api.js";
import {
  renderGallery,
  renderInterpolationStrip,
  renderMixPanel,
  renderOfflineBanner,
  renderTransferResult,
} from "./panels.js";
import { SessionState } from "./state.js";

const PAGE_SIZE = 24;

export async function boot(root: HTMLElement, baseUrl: string): Promise<void> {
  const client = new ApiClient(baseUrl);
  const state = new SessionState();

  const gallery = document.createElement("section");
  const transfer = document.createElement("section");
  const mixPanel = document.createElement("section");
  const interp = document.createElement("section");
  root.replaceChildren(gallery, transfer, mixPanel, interp);

  let schemaNames: string[] = [];
  try {
    const schema = await client.getSchema();
    schemaNames = schema.attributes.map((a) => a.name);
    const page = await client.getSamples(PAGE_SIZE, 0);
    renderGallery(gallery, page.samples, (id, role) => {
      if (role === "source") {
        state.sourceId = id;
        if (state.interpolation.idI === null) state.interpolation.idI = id;
        else state.interpolation.idJ = id;
      } else {
        const attr = schemaNames[state.donors.size % schemaNames.length]!;
        state.donors.set(attr, id);
        state.addMixComponent(id);
        renderMixPanel(mixPanel, state, () => void runMix());
        void runTransfer();
      }
    });
  } catch (e) {
    renderOfflineBanner(root, `service unreachable: ${String(e)}`);
    return;
  }

  async function runTransfer(): Promise<void> {
    if (state.sourceId === null || state.donors.size === 0) return;
    const body = {
      source_id: state.sourceId,
      donors: Object.fromEntries(state.donors),
      attributes: [...state.donors.keys()],
    };
    let response: TransferResponse;
    try {
      response = await client.transfer(body);
    } catch (e) {
      if (e instanceof ServiceError) {
        renderOfflineBanner(transfer, e.message);
        return;
      }
      throw e;
    }
    state.recordResult(body, response.image);
    renderTransferResult(transfer, response, () => {
      // the feedback loop: feed the result's nearest catalog sample back in
      void runTransfer();
    });
  }

  async function runMix(): Promise<void> {
    if (state.mixComponentIds.length < 2 || schemaNames.length === 0) return;
    const body = {
      attribute: schemaNames[schemaNames.length - 1]!,
      components: state.mixComponentIds.map((id, i) => ({
        id,
        weight: state.mixWeights[i]!,
      })),
      base_id: state.sourceId,
    };
    const out = await client.mix(body);
    state.recordResult(body, out.image);
  }

  async function runInterpolation(): Promise<void> {
    const { idI, idJ, steps } = state.interpolation;
    if (idI === null || idJ === null) return;
    const body = {
      attribute: schemaNames[0]!,
      id_i: idI,
      id_j: idJ,
      steps,
    };
    const out = await client.interpolate(body);
    renderInterpolationStrip(interp, out.images, state);
  }

  // expose the actions for the static page's buttons
  (root as HTMLElement & { explorer?: unknown }).explorer = {
    runTransfer,
    runMix,
    runInterpolation,
    state,
  };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = new URLSearchParams(location.search).get("service")
    ?? "http://127.0.0.1:8000";
  void boot(document.getElementById("app")!, base);
}
