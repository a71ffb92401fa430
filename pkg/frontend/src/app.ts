/** DOM shell wiring the editor, rasterizer, client, and panels together.
 * Everything with logic worth testing lives in the imported modules; this
 * file only moves pixels between them and the page. */
import { ApiError, ServiceClient, type GenerateRequest, type JobStatus } from "./client.js";
import { base64ToBytes, bytesToBase64 } from "./b64.js";
import { decodePng, encodeRgbPng, type DecodedImage } from "./png.js";
import { rasterize, type RasterImage } from "./raster.js";
import { SketchEditor, type Point, type Stroke, type StrokeColor } from "./stroke.js";
import { formatElevation, grayscaleRgba, heightStats, hypsometricRgba, textureRgba } from "./colormap.js";
import { buildPreviewTriangles, decimateGrid } from "./preview.js";
import { HistoryStore } from "./history.js";
import type { AppConfig } from "./config.js";

const PAGE = `
<header>
  <h1>terrain sketchpad</h1>
  <span class="health" data-role="health">checking service…</span>
</header>
<main>
  <section class="panel">
    <h2>sketch</h2>
    <div class="toolbar" data-role="tools">
      <button data-color="red" class="swatch red active" title="valley">valley</button>
      <button data-color="green" class="swatch green" title="ridge">ridge</button>
      <button data-color="blue" class="swatch blue" title="cliff">cliff</button>
      <button data-role="eraser" title="delete strokes under the cursor">eraser</button>
      <label>width <input data-role="width" type="range" min="1" max="8" step="1" value="2"></label>
      <button data-role="undo">undo</button>
      <button data-role="redo">redo</button>
      <button data-role="clear">clear</button>
    </div>
    <canvas data-role="sketch" class="sketch"></canvas>
    <div class="toolbar">
      <label>steps <input data-role="steps" type="number" min="1" placeholder="service default"></label>
      <label>seed <input data-role="seed" type="number" min="0" placeholder="random"></label>
      <button data-role="generate" class="primary">generate</button>
    </div>
    <p class="status" data-role="status"></p>
  </section>
  <section class="panel">
    <h2>heightmap</h2>
    <div class="toolbar">
      <label>display
        <select data-role="display">
          <option value="gray">grayscale</option>
          <option value="hypso">hypsometric</option>
        </select>
      </label>
      <span data-role="elevation" class="elevation"></span>
    </div>
    <canvas data-role="height" class="result"></canvas>
  </section>
  <section class="panel">
    <h2>texture</h2>
    <canvas data-role="texture" class="result"></canvas>
  </section>
  <section class="panel">
    <h2>3d preview</h2>
    <canvas data-role="preview" width="360" height="260" class="preview"></canvas>
  </section>
  <section class="panel wide">
    <h2>history</h2>
    <div data-role="history" class="history"></div>
  </section>
</main>
`;

export class App {
  private readonly editor: SketchEditor;
  private readonly client: ServiceClient;
  private readonly history: HistoryStore;
  private readonly scale: number;

  private color: StrokeColor = "red";
  private erasing = false;
  private liveStroke: Stroke | null = null;
  private lastHeight: DecodedImage | null = null;

  private readonly sketchCanvas: HTMLCanvasElement;
  private readonly heightCanvas: HTMLCanvasElement;
  private readonly textureCanvas: HTMLCanvasElement;
  private readonly previewCanvas: HTMLCanvasElement;
  private readonly statusLine: HTMLElement;
  private readonly elevationLabel: HTMLElement;
  private readonly historyPane: HTMLElement;
  private readonly widthInput: HTMLInputElement;
  private readonly stepsInput: HTMLInputElement;
  private readonly seedInput: HTMLInputElement;
  private readonly displaySelect: HTMLSelectElement;
  private readonly generateButton: HTMLButtonElement;

  constructor(
    root: HTMLElement,
    private readonly config: AppConfig,
    client?: ServiceClient,
  ) {
    root.innerHTML = PAGE;
    this.editor = new SketchEditor(config.resolutionPx);
    this.client = client ?? new ServiceClient(config.baseUrl, config.pollIntervalMs);
    this.history = new HistoryStore(config.historyLimit);
    this.scale = Math.max(1, Math.floor(320 / config.resolutionPx));

    const pick = <T extends HTMLElement>(role: string): T => {
      const el = root.querySelector<T>(`[data-role="${role}"]`);
      if (!el) throw new Error(`missing page element ${role}`);
      return el;
    };
    this.sketchCanvas = pick<HTMLCanvasElement>("sketch");
    this.heightCanvas = pick<HTMLCanvasElement>("height");
    this.textureCanvas = pick<HTMLCanvasElement>("texture");
    this.previewCanvas = pick<HTMLCanvasElement>("preview");
    this.statusLine = pick("status");
    this.elevationLabel = pick("elevation");
    this.historyPane = pick("history");
    this.widthInput = pick<HTMLInputElement>("width");
    this.stepsInput = pick<HTMLInputElement>("steps");
    this.seedInput = pick<HTMLInputElement>("seed");
    this.displaySelect = pick<HTMLSelectElement>("display");
    this.generateButton = pick<HTMLButtonElement>("generate");

    this.sketchCanvas.width = config.resolutionPx;
    this.sketchCanvas.height = config.resolutionPx;
    this.sketchCanvas.style.width = `${config.resolutionPx * this.scale}px`;
    this.sketchCanvas.style.height = `${config.resolutionPx * this.scale}px`;

    this.wireTools(root);
    this.wirePointer();
    this.generateButton.addEventListener("click", () => void this.onGenerate());
    this.displaySelect.addEventListener("change", () => this.renderHeight());
    this.redrawSketch();
    void this.checkHealth(pick("health"));
  }

  private wireTools(root: HTMLElement): void {
    const swatches = Array.from(root.querySelectorAll<HTMLButtonElement>("[data-color]"));
    for (const button of swatches) {
      button.addEventListener("click", () => {
        this.color = button.dataset.color as StrokeColor;
        this.erasing = false;
        for (const other of swatches) other.classList.toggle("active", other === button);
        root.querySelector('[data-role="eraser"]')?.classList.remove("active");
      });
    }
    const eraser = root.querySelector<HTMLButtonElement>('[data-role="eraser"]');
    eraser?.addEventListener("click", () => {
      this.erasing = !this.erasing;
      eraser.classList.toggle("active", this.erasing);
    });
    root.querySelector('[data-role="undo"]')?.addEventListener("click", () => {
      this.editor.undo();
      this.redrawSketch();
    });
    root.querySelector('[data-role="redo"]')?.addEventListener("click", () => {
      this.editor.redo();
      this.redrawSketch();
    });
    root.querySelector('[data-role="clear"]')?.addEventListener("click", () => {
      this.editor.clear();
      this.redrawSketch();
    });
  }

  private canvasPoint(event: PointerEvent): Point {
    const rect = this.sketchCanvas.getBoundingClientRect();
    const x = ((event.clientX - rect.left) / rect.width) * this.config.resolutionPx;
    const y = ((event.clientY - rect.top) / rect.height) * this.config.resolutionPx;
    return { x: Math.floor(x), y: Math.floor(y) };
  }

  private wirePointer(): void {
    const canvas = this.sketchCanvas;
    canvas.addEventListener("pointerdown", (event) => {
      canvas.setPointerCapture(event.pointerId);
      const p = this.canvasPoint(event);
      if (this.erasing) {
        if (this.editor.eraseAt(p, Number(this.widthInput.value) / 2)) this.redrawSketch();
        return;
      }
      this.liveStroke = { color: this.color, width: Number(this.widthInput.value), points: [p] };
      this.redrawSketch();
    });
    canvas.addEventListener("pointermove", (event) => {
      const p = this.canvasPoint(event);
      if (this.erasing && event.buttons) {
        if (this.editor.eraseAt(p, Number(this.widthInput.value) / 2)) this.redrawSketch();
        return;
      }
      if (!this.liveStroke) return;
      const last = this.liveStroke.points[this.liveStroke.points.length - 1];
      if (last.x !== p.x || last.y !== p.y) {
        this.liveStroke.points.push(p);
        this.redrawSketch();
      }
    });
    const finish = () => {
      if (!this.liveStroke) return;
      this.editor.addStroke(this.liveStroke);
      this.liveStroke = null;
      this.redrawSketch();
    };
    canvas.addEventListener("pointerup", finish);
    canvas.addEventListener("pointercancel", () => {
      this.liveStroke = null;
      this.redrawSketch();
    });
  }

  private redrawSketch(): void {
    const doc = this.editor.document;
    const shown = this.liveStroke
      ? { ...doc, strokes: [...doc.strokes, this.liveStroke] }
      : doc;
    this.blit(this.sketchCanvas, rasterize(shown));
  }

  private blit(canvas: HTMLCanvasElement, image: RasterImage): void {
    canvas.width = image.width;
    canvas.height = image.height;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const pixels = new Uint8ClampedArray(image.rgba); // plain-ArrayBuffer copy for ImageData
    ctx.putImageData(new ImageData(pixels, image.width, image.height), 0, 0);
  }

  private setStatus(text: string, isError = false): void {
    this.statusLine.textContent = text;
    this.statusLine.classList.toggle("error", isError);
  }

  private async checkHealth(label: HTMLElement): Promise<void> {
    try {
      const health = await this.client.health();
      if (health.model_loaded) {
        const digest = health.checkpoint_hash ? health.checkpoint_hash.slice(0, 12) : "?";
        label.textContent = `service ready, checkpoint ${digest}`;
      } else {
        label.textContent = "service up, model not loaded";
      }
    } catch (exc) {
      label.textContent = `service unreachable: ${exc instanceof Error ? exc.message : exc}`;
    }
  }

  private readOptionalInt(input: HTMLInputElement): number | undefined {
    if (input.value.trim() === "") return undefined;
    const value = Number(input.value);
    return Number.isInteger(value) ? value : undefined;
  }

  private async onGenerate(): Promise<void> {
    if (this.client.busy) {
      this.setStatus("a request is already running", true);
      return;
    }
    const doc = this.editor.document;
    const png = encodeRgbPng(rasterize(doc));
    const request: GenerateRequest = { sketch_png_base64: bytesToBase64(png) };
    const steps = this.readOptionalInt(this.stepsInput);
    if (steps !== undefined) request.steps = steps;
    const seed = this.readOptionalInt(this.seedInput);
    if (seed !== undefined) request.seed = seed;

    this.generateButton.disabled = true;
    try {
      const status = await this.client.generate(request, (s) =>
        this.setStatus(`job ${s.id}: ${s.state}…`),
      );
      if (status.state === "failed") {
        this.setStatus(`generation failed: ${status.error ?? "unknown error"}`, true);
        return;
      }
      await this.showResult(status, png);
      this.setStatus(`job ${status.id} done, seed ${status.seed}, ${status.steps} steps`);
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 400) {
        this.setStatus(`rejected: ${exc.detail}`, true);
      } else {
        this.setStatus(exc instanceof Error ? exc.message : String(exc), true);
      }
    } finally {
      this.generateButton.disabled = false;
    }
  }

  private async showResult(status: JobStatus, sketchPng: Uint8Array): Promise<void> {
    if (!status.result) return;
    this.lastHeight = await decodePng(base64ToBytes(status.result.heightmap_png_base64));
    const texture = await decodePng(base64ToBytes(status.result.texture_png_base64));
    this.renderHeight();
    this.blit(this.textureCanvas, {
      width: texture.width,
      height: texture.height,
      rgba: textureRgba(texture.samples, texture.channels),
    });
    this.renderPreview();
    this.history.push({ doc: this.editor.document, sketchPng, result: status });
    this.renderHistory();
  }

  private renderHeight(): void {
    const image = this.lastHeight;
    if (!image) return;
    const rgba =
      this.displaySelect.value === "hypso"
        ? hypsometricRgba(image.samples)
        : grayscaleRgba(image.samples);
    this.blit(this.heightCanvas, { width: image.width, height: image.height, rgba });
    this.elevationLabel.textContent = formatElevation(heightStats(image.samples));
  }

  private renderPreview(): void {
    const image = this.lastHeight;
    if (!image) return;
    const grid = decimateGrid(image.samples as Uint16Array, image.width, image.height);
    const triangles = buildPreviewTriangles(grid, this.previewCanvas.width, this.previewCanvas.height);
    const ctx = this.previewCanvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, this.previewCanvas.width, this.previewCanvas.height);
    for (const tri of triangles) {
      ctx.fillStyle = `rgb(${tri.color[0]},${tri.color[1]},${tri.color[2]})`;
      ctx.beginPath();
      ctx.moveTo(tri.xs[0], tri.ys[0]);
      ctx.lineTo(tri.xs[1], tri.ys[1]);
      ctx.lineTo(tri.xs[2], tri.ys[2]);
      ctx.closePath();
      ctx.fill();
      ctx.strokeStyle = ctx.fillStyle; // hide hairline seams between fills
      ctx.stroke();
    }
  }

  private renderHistory(): void {
    this.historyPane.innerHTML = "";
    this.history.entries.forEach((entry, index) => {
      const cell = document.createElement("div");
      cell.className = "history-entry";
      const thumb = document.createElement("canvas");
      thumb.className = "thumb";
      this.blit(thumb, rasterize(entry.doc));
      const load = document.createElement("button");
      load.textContent = `load #${this.history.entries.length - index}`;
      load.addEventListener("click", () => {
        this.editor.load(entry.doc);
        this.redrawSketch();
        this.setStatus(`loaded sketch from job ${entry.result.id}`);
      });
      cell.append(thumb, load);
      this.historyPane.append(cell);
    });
  }
}
