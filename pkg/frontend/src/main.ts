import { GatewayClient } from "./api.js";
import { SteerApp } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

// served by the gateway under /ui; the API lives at the origin root
const app = new SteerApp(root, new GatewayClient(""));
(window as unknown as { app: SteerApp }).app = app;
