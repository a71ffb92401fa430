import { App } from "./app.js";
import { configFromQuery } from "./config.js";

const root = document.querySelector<HTMLElement>("#app");
if (!root) {
  throw new Error("missing #app mount point");
}
new App(root, configFromQuery(window.location.search));
