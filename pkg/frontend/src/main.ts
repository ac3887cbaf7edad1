/** DOM wiring: load/paint, optimize, slider, per-parameter panel, overlay. */

import { ServiceClient } from "./api.js";
import { MaskBuffer } from "./maskBuffer.js";
import { ParamsPanel } from "./paramsPanel.js";
import { decodePgm, overlayRgba } from "./pgm.js";
import { ALPHA_RANGE, SCALAR_RANGES } from "./ranges.js";
import { RenderQueue } from "./renderQueue.js";
import { EditorState, initialState, pollJob } from "./state.js";

const client = new ServiceClient("");
const state: EditorState = initialState();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const imageInput = $<HTMLInputElement>("image-input");
const brushSize = $<HTMLInputElement>("brush-size");
const paintCanvas = $<HTMLCanvasElement>("paint-canvas");
const photoCanvas = $<HTMLCanvasElement>("photo-canvas");
const resultImg = $<HTMLImageElement>("result");
const statusLine = $<HTMLElement>("status");
const alphaSlider = $<HTMLInputElement>("alpha");
const alphaValue = $<HTMLElement>("alpha-value");
const optimizeButton = $<HTMLButtonElement>("optimize");
const undoButton = $<HTMLButtonElement>("undo");
const clearButton = $<HTMLButtonElement>("clear");
const modeSelect = $<HTMLSelectElement>("mode");
const viewSelect = $<HTMLSelectElement>("view");
const panelHost = $<HTMLElement>("panel");
const metricsHost = $<HTMLElement>("metrics");

let sourceImage: HTMLImageElement | null = null;
let mask: MaskBuffer | null = null;
let lastRenderUrl: string | null = null;

function toast(message: string): void {
  statusLine.textContent = message;
}

alphaSlider.min = String(ALPHA_RANGE[0]);
alphaSlider.max = String(ALPHA_RANGE[1]);
alphaSlider.step = "0.01";
alphaSlider.value = "1";

const renderQueue = new RenderQueue<Blob>(
  (alpha) => {
    if (!state.sessionId) return Promise.reject(new Error("no session"));
    return client.fetchRender(state.sessionId, alpha);
  },
  (blob) => {
    if (lastRenderUrl) URL.revokeObjectURL(lastRenderUrl);
    lastRenderUrl = URL.createObjectURL(blob);
    if (state.view === "edited") resultImg.src = lastRenderUrl;
  },
);
renderQueue.onError = (error) => toast(`render failed: ${error}`);

const panel = new ParamsPanel(async (patch) => {
  if (!state.sessionId) throw new Error("no session");
  await client.patchParams(state.sessionId, patch);
  renderQueue.request(state.alpha);
  renderQueue.flush();
});
panel.onRollback = (path, message) => toast(`${path}: ${message}`);

// -- image loading and mask painting ---------------------------------------

imageInput.addEventListener("change", () => {
  const file = imageInput.files?.[0];
  if (!file) return;
  const url = URL.createObjectURL(file);
  const img = new Image();
  img.onload = () => {
    sourceImage = img;
    photoCanvas.width = paintCanvas.width = img.naturalWidth;
    photoCanvas.height = paintCanvas.height = img.naturalHeight;
    photoCanvas.getContext("2d")!.drawImage(img, 0, 0);
    mask = new MaskBuffer(img.naturalWidth, img.naturalHeight);
    repaintMask();
    toast("paint the region to emphasize, then optimize");
    URL.revokeObjectURL(url);
  };
  img.src = url;
});

function repaintMask(): void {
  if (!mask) return;
  const ctx = paintCanvas.getContext("2d")!;
  const image = new ImageData(mask.toRgba(), mask.width, mask.height);
  ctx.putImageData(image, 0, 0);
}

let painting = false;
function canvasPoint(event: PointerEvent): [number, number] {
  const rect = paintCanvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * paintCanvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * paintCanvas.height;
  return [x, y];
}

paintCanvas.addEventListener("pointerdown", (event) => {
  if (!mask) return;
  painting = true;
  mask.beginStroke(Number(brushSize.value));
  const [x, y] = canvasPoint(event);
  mask.addPoint(x, y);
  repaintMask();
});
paintCanvas.addEventListener("pointermove", (event) => {
  if (!painting || !mask) return;
  const [x, y] = canvasPoint(event);
  mask.addPoint(x, y);
  repaintMask();
});
window.addEventListener("pointerup", () => {
  if (painting && mask) mask.endStroke();
  painting = false;
});
undoButton.addEventListener("click", () => {
  mask?.undo();
  repaintMask();
});
clearButton.addEventListener("click", () => {
  mask?.clear();
  repaintMask();
});

// -- optimize ---------------------------------------------------------------

async function uploadBlobs(): Promise<string> {
  if (!sourceImage || !mask) throw new Error("load an image first");
  const imageBlob = await new Promise<Blob>((resolve, reject) =>
    photoCanvas.toBlob((b) => (b ? resolve(b) : reject(new Error("encode failed"))), "image/png"),
  );
  const maskCanvas = document.createElement("canvas");
  maskCanvas.width = mask.width;
  maskCanvas.height = mask.height;
  maskCanvas.getContext("2d")!.putImageData(new ImageData(mask.toRgba(), mask.width, mask.height), 0, 0);
  const maskBlob = await new Promise<Blob>((resolve, reject) =>
    maskCanvas.toBlob((b) => (b ? resolve(b) : reject(new Error("encode failed"))), "image/png"),
  );
  return client.createSession(imageBlob, maskBlob);
}

optimizeButton.addEventListener("click", async () => {
  if (!mask) {
    toast("load an image first");
    return;
  }
  const blocked = mask.submitBlockReason();
  if (blocked) {
    toast(blocked);
    return;
  }
  if (state.job === "running") {
    toast("an optimization is already running");
    return;
  }
  try {
    optimizeButton.disabled = true;
    toast("uploading session...");
    state.sessionId = await uploadBlobs();
    toast("optimizing...");
    state.job = "running";
    await client.optimize(state.sessionId, {
      mode: modeSelect.value as "increase" | "decrease",
      iters: 100,
      seed: 0,
    });
    const final = await pollJob(
      () => client.info(state.sessionId!),
      (job, message) => {
        state.job = job;
        state.jobMessage = message;
        if (job === "running") toast("optimizing...");
      },
    );
    if (final === "failed") {
      toast(`optimization failed: ${state.jobMessage}`);
      return;
    }
    toast("done; drag the saliency slider");
    panel.load(await client.params(state.sessionId));
    buildPanel();
    renderQueue.request(state.alpha);
    renderQueue.flush();
    void refreshMetrics();
  } catch (error) {
    state.job = "failed";
    toast(String(error));
  } finally {
    optimizeButton.disabled = false;
  }
});

// -- saliency slider and views -----------------------------------------------

alphaSlider.addEventListener("input", () => {
  state.alpha = Number(alphaSlider.value);
  alphaValue.textContent = state.alpha.toFixed(2);
  renderQueue.request(state.alpha);
});

viewSelect.addEventListener("change", async () => {
  state.view = viewSelect.value as EditorState["view"];
  if (state.view === "original" && sourceImage) {
    resultImg.src = sourceImage.src;
  } else if (state.view === "edited" && lastRenderUrl) {
    resultImg.src = lastRenderUrl;
  } else if (state.view === "saliency-overlay" && state.sessionId) {
    const map = decodePgm(await client.fetchSaliency(state.sessionId, "after"));
    const overlay = document.createElement("canvas");
    overlay.width = map.width;
    overlay.height = map.height;
    overlay.getContext("2d")!.putImageData(new ImageData(overlayRgba(map), map.width, map.height), 0, 0);
    const compositeCanvas = document.createElement("canvas");
    compositeCanvas.width = map.width;
    compositeCanvas.height = map.height;
    const ctx = compositeCanvas.getContext("2d")!;
    const base = new Image();
    base.onload = () => {
      ctx.drawImage(base, 0, 0, map.width, map.height);
      ctx.drawImage(overlay, 0, 0);
      resultImg.src = compositeCanvas.toDataURL("image/png");
    };
    base.src = lastRenderUrl ?? (sourceImage ? sourceImage.src : "");
  }
});

// -- parameter panel ----------------------------------------------------------

function buildPanel(): void {
  panelHost.textContent = "";
  for (const region of ["foreground", "background"] as const) {
    const heading = document.createElement("h3");
    heading.textContent = region;
    panelHost.appendChild(heading);
    for (const field of Object.keys(SCALAR_RANGES) as Array<keyof typeof SCALAR_RANGES>) {
      const [lo, hi] = SCALAR_RANGES[field];
      const row = document.createElement("label");
      row.className = "param-row";
      row.textContent = field;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(lo);
      slider.max = String(hi);
      slider.step = "0.01";
      slider.value = String(panel.scalar(region, field));
      slider.addEventListener("change", async () => {
        const accepted = await panel.setScalar(region, field, Number(slider.value));
        if (!accepted) slider.value = String(panel.scalar(region, field));
      });
      row.appendChild(slider);
      panelHost.appendChild(row);
    }
  }
}

async function refreshMetrics(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const report = await client.metrics(state.sessionId);
    metricsHost.textContent = Object.entries(report)
      .map(([key, value]) => `${key}: ${value === null ? "undefined" : value.toFixed(3)}`)
      .join("  ");
  } catch {
    metricsHost.textContent = "";
  }
}

toast("load an image to begin");
