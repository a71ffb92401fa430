/** App settings. The canvas size must match the service's configured resolution;
 * the service rejects sketches of any other size, so both knobs live here. */
export interface AppConfig {
  /** Origin of the generation service, no trailing slash. */
  baseUrl: string;
  /** Sketch canvas size in pixels (square). */
  resolutionPx: number;
  /** Delay between job polls. */
  pollIntervalMs: number;
  /** How many past (sketch, result) pairs the history panel keeps. */
  historyLimit: number;
}

export const DEFAULT_CONFIG: AppConfig = {
  baseUrl: "http://127.0.0.1:8765",
  resolutionPx: 64,
  pollIntervalMs: 500,
  historyLimit: 8,
};

/** Read overrides from the page query string, e.g. ?service=http://host:9000&resolution=32 */
export function configFromQuery(search: string, defaults: AppConfig = DEFAULT_CONFIG): AppConfig {
  const params = new URLSearchParams(search);
  const config = { ...defaults };
  const base = params.get("service");
  if (base !== null && base !== "") {
    config.baseUrl = base.replace(/\/+$/, "");
  }
  const px = params.get("resolution");
  if (px !== null) {
    const parsed = Number(px);
    if (Number.isInteger(parsed) && parsed > 0) {
      config.resolutionPx = parsed;
    }
  }
  return config;
}
