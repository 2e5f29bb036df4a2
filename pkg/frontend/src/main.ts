/** Browser entry point: wire the grid, service client, controller, and view. */

import { ServiceClient } from "./client.js";
import { SuggestController } from "./controller.js";
import { UiGrid } from "./grid.js";
import { AppView } from "./view.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8117";

function serviceUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  return fromQuery ?? DEFAULT_SERVICE;
}

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const grid = new UiGrid();
const client = new ServiceClient(serviceUrl());
const controller = new SuggestController(grid, client);
new AppView(root, controller);
void controller.init();
