// DOM wiring: drawing canvas, controls, preview pane.

import { httpTransport } from "./api.js";
import { DEBOUNCE_MS, PreviewController } from "./preview.js";
import {
  CANVAS_SIZE, SessionState, clampGamma, defaultSession, exportSession, importSession, reseed,
} from "./session.js";

interface StudioElements {
  canvas: HTMLCanvasElement;
  preview: HTMLImageElement;
  gammaSlider: HTMLInputElement;
  gammaLabel: HTMLElement;
  seedLabel: HTMLElement;
  latencyLabel: HTMLElement;
  domainSelect: HTMLSelectElement;
  brushSlider: HTMLInputElement;
  eraserToggle: HTMLInputElement;
  reseedButton: HTMLButtonElement;
  clearButton: HTMLButtonElement;
  exportButton: HTMLButtonElement;
  importInput: HTMLInputElement;
  errorBanner: HTMLElement;
}

export class SketchStudio {
  private state: SessionState;
  private controller: PreviewController;
  private ctx: CanvasRenderingContext2D;
  private drawing = false;

  constructor(private el: StudioElements, serverUrl: string) {
    this.state = defaultSession(serverUrl, el.domainSelect.value || "night");
    const ctx = el.canvas.getContext("2d");
    if (!ctx) throw new Error("2D canvas not supported");
    this.ctx = ctx;
    el.canvas.width = CANVAS_SIZE;
    el.canvas.height = CANVAS_SIZE;
    this.clearCanvas();
    this.controller = new PreviewController(httpTransport(serverUrl), {
      onPreview: (update) => {
        this.el.preview.src = `data:image/png;base64,${update.image}`;
        this.el.seedLabel.textContent = String(update.seed);
        this.el.gammaLabel.textContent = update.gamma.toFixed(2);
        this.el.latencyLabel.textContent = `${update.latencyMs.toFixed(0)} ms`;
        this.state.lastLatencyMs = update.latencyMs;
        this.hideError();
      },
      onError: (message) => this.showError(message),
    }, DEBOUNCE_MS);
    this.bindEvents();
  }

  private bindEvents(): void {
    const canvas = this.el.canvas;
    canvas.addEventListener("pointerdown", (ev) => {
      this.drawing = true;
      canvas.setPointerCapture(ev.pointerId);
      this.strokeTo(ev, true);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (this.drawing) this.strokeTo(ev, false);
    });
    const finish = (ev: PointerEvent) => {
      if (!this.drawing) return;
      this.drawing = false;
      canvas.releasePointerCapture(ev.pointerId);
      this.commitStroke();
    };
    canvas.addEventListener("pointerup", finish);
    canvas.addEventListener("pointercancel", finish);

    this.el.gammaSlider.addEventListener("input", () => {
      const value = clampGamma(parseFloat(this.el.gammaSlider.value));
      this.state = { ...this.state, gamma: value };
      this.el.gammaSlider.value = String(value);
      this.requestPreview();
    });
    this.el.domainSelect.addEventListener("change", () => {
      this.state = { ...this.state, domain: this.el.domainSelect.value };
      this.requestPreview();
    });
    this.el.brushSlider.addEventListener("input", () => {
      this.state = { ...this.state, brushSize: parseInt(this.el.brushSlider.value, 10) };
    });
    this.el.eraserToggle.addEventListener("change", () => {
      this.state = { ...this.state, eraser: this.el.eraserToggle.checked };
    });
    this.el.reseedButton.addEventListener("click", () => {
      this.state = reseed(this.state);
      this.requestPreview();
    });
    this.el.clearButton.addEventListener("click", () => {
      this.clearCanvas();
      this.commitStroke();
    });
    this.el.exportButton.addEventListener("click", () => this.downloadSession());
    this.el.importInput.addEventListener("change", () => void this.loadSessionFile());
  }

  private strokeTo(ev: PointerEvent, begin: boolean): void {
    const rect = this.el.canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * CANVAS_SIZE;
    const y = ((ev.clientY - rect.top) / rect.height) * CANVAS_SIZE;
    this.ctx.strokeStyle = this.state.eraser ? "#ffffff" : "#000000";
    this.ctx.lineWidth = this.state.brushSize;
    this.ctx.lineCap = "round";
    if (begin) {
      this.ctx.beginPath();
      this.ctx.moveTo(x, y);
      this.ctx.lineTo(x + 0.01, y + 0.01);
    } else {
      this.ctx.lineTo(x, y);
    }
    this.ctx.stroke();
  }

  private clearCanvas(): void {
    this.ctx.fillStyle = "#ffffff";
    this.ctx.fillRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
  }

  private canvasPng(): string {
    return this.el.canvas.toDataURL("image/png").split(",", 2)[1];
  }

  /** Pointer-up: snapshot the raster and schedule a (debounced) preview. */
  commitStroke(): void {
    this.requestPreview();
  }

  private requestPreview(): void {
    this.state = { ...this.state, canvasPng: this.canvasPng() };
    this.controller.request(this.state);
  }

  private showError(message: string): void {
    this.el.errorBanner.textContent = `server error: ${message}`;
    this.el.errorBanner.style.display = "block";
  }

  private hideError(): void {
    this.el.errorBanner.style.display = "none";
  }

  private downloadSession(): void {
    this.state = { ...this.state, canvasPng: this.canvasPng() };
    const blob = new Blob([exportSession(this.state)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "sketch-session.json";
    a.click();
    URL.revokeObjectURL(a.href);
  }

  private async loadSessionFile(): Promise<void> {
    const file = this.el.importInput.files?.[0];
    if (!file) return;
    try {
      const incoming = importSession(await file.text());
      this.state = { ...incoming, serverUrl: this.state.serverUrl };
      this.el.gammaSlider.value = String(this.state.gamma);
      this.el.domainSelect.value = this.state.domain;
      this.el.brushSlider.value = String(this.state.brushSize);
      this.el.eraserToggle.checked = this.state.eraser;
      if (this.state.canvasPng) {
        const img = new Image();
        img.onload = () => {
          this.clearCanvas();
          this.ctx.drawImage(img, 0, 0, CANVAS_SIZE, CANVAS_SIZE);
          this.requestPreview();
        };
        img.src = `data:image/png;base64,${this.state.canvasPng}`;
      }
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
    }
  }
}

export function mountStudio(serverUrl: string): SketchStudio {
  const byId = <T extends HTMLElement>(id: string): T => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  };
  return new SketchStudio({
    canvas: byId<HTMLCanvasElement>("sketch-canvas"),
    preview: byId<HTMLImageElement>("preview-image"),
    gammaSlider: byId<HTMLInputElement>("gamma-slider"),
    gammaLabel: byId("gamma-label"),
    seedLabel: byId("seed-label"),
    latencyLabel: byId("latency-label"),
    domainSelect: byId<HTMLSelectElement>("domain-select"),
    brushSlider: byId<HTMLInputElement>("brush-slider"),
    eraserToggle: byId<HTMLInputElement>("eraser-toggle"),
    reseedButton: byId<HTMLButtonElement>("reseed-button"),
    clearButton: byId<HTMLButtonElement>("clear-button"),
    exportButton: byId<HTMLButtonElement>("export-button"),
    importInput: byId<HTMLInputElement>("import-input"),
    errorBanner: byId("error-banner"),
  }, serverUrl);
}
