/**
 * Scripted browser session against a live gateway (`kgstory serve --mock`):
 * create a story, override one keyword, pin two knowledge sentences,
 * complete all five sentences, export, and feed the export through the
 * batch `eval metrics` command. Also checks that a stale tab's step
 * request surfaces the gateway conflict as an inline UI error.
 */

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { Window } from "happy-dom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { SteerApp } from "../src/ui.js";

const execFileAsync = promisify(execFile);

const KB = [
  "rain\tCauses\tflood",
  "flood\tCauses\tdamage",
  "sunshine\tCauses\tjoy",
  "sunshine\tCauses\twarmth",
  "joy\tCauses\tsmile",
  "warmth\tIsA\tcomfort",
].join("\n");

let gateway: ChildProcess | null = null;
let baseUrl = "";
let workdir = "";

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      server.close(() => resolve(address.port));
    });
  });
}

async function waitForHealthy(url: string, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i += 1) {
    try {
      const response = await fetch(`${url}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`gateway at ${url} never became healthy`);
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "steer-ui-"));
  const kbPath = join(workdir, "kb.tsv");
  writeFileSync(kbPath, KB + "\n", "utf-8");
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  gateway = spawn(
    "python3",
    ["-m", "kgstory", "serve", "--kb", kbPath, "--mock", "--seed", "3", "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealthy(baseUrl);
}, 40_000);

afterAll(() => {
  gateway?.kill();
});

function makeApp(): { app: SteerApp; root: HTMLElement; win: Window } {
  const win = new Window();
  win.document.body.innerHTML = '<div id="app"></div>';
  const root = win.document.getElementById("app") as unknown as HTMLElement;
  const client = new GatewayClient(baseUrl, (input, init) => fetch(input, init));
  return { app: new SteerApp(root, client), root, win };
}

function el<T extends HTMLElement>(root: HTMLElement, id: string): T {
  return root.querySelector(`#${id}`) as T;
}

function submit(root: HTMLElement, win: Window, formId: string): void {
  el<HTMLFormElement>(root, formId).dispatchEvent(
    new win.Event("submit", { bubbles: true, cancelable: true }) as unknown as Event,
  );
}

describe("steering a live gateway session", () => {
  it(
    "creates, overrides, pins, completes, exports, and round-trips eval metrics",
    async () => {
      const { app, root, win } = makeApp();

      // create the story from its first sentence
      el<HTMLInputElement>(root, "first-sentence").value = "there was rain .";
      submit(root, win, "start-form");
      await app.lastAction;
      expect(app.view?.phase).toBe("keywords_ready");
      expect(el<HTMLInputElement>(root, "keywords").value).toBe("rain");

      // override the predicted keyword with a different one
      el<HTMLInputElement>(root, "keywords").value = "sunshine";
      submit(root, win, "keyword-form");
      await app.lastAction;
      const boxes = root.querySelectorAll<HTMLInputElement>(
        "#knowledge input[type=checkbox]",
      );
      expect(boxes.length).toBeGreaterThanOrEqual(2);

      // pin two knowledge sentences
      boxes[0].checked = true;
      boxes[1].checked = true;
      el<HTMLButtonElement>(root, "pin").click();
      await app.lastAction;
      expect(app.view?.pinned_ids?.length).toBe(2);

      // generate the overridden step, then accept predictions to completion
      el<HTMLButtonElement>(root, "generate").click();
      await app.lastAction;
      const overridden = app.view?.steps[1];
      expect(overridden?.keyword_source).toBe("human");
      expect(overridden?.knowledge.length).toBe(2);

      while (app.view?.phase !== "complete") {
        submit(root, win, "keyword-form"); // accept the prefilled predictions
        await app.lastAction;
        el<HTMLButtonElement>(root, "generate").click();
        await app.lastAction;
      }
      expect(root.querySelectorAll("#story li").length).toBe(5);
      expect(el<HTMLDivElement>(root, "complete-banner").hidden).toBe(false);

      // displayed story equals the gateway state byte-for-byte
      const serverView = await new GatewayClient(baseUrl, (i, init) => fetch(i, init)).getSession(
        app.view.session_id,
      );
      const shown = Array.from(root.querySelectorAll("#story .sentence")).map(
        (node) => node.textContent,
      );
      expect(shown).toEqual(serverView.steps.map((s) => s.sentence));

      // export round-trips through the batch metrics command
      const storyPath = join(workdir, "exported.tsv");
      writeFileSync(storyPath, app.exportStory() + "\n", "utf-8");
      const planPath = join(workdir, "exported_plan.tsv");
      writeFileSync(planPath, app.exportPlanLog(), "utf-8");
      const { stdout } = await execFileAsync("python3", [
        "-m",
        "kgstory",
        "eval",
        "metrics",
        "--stories",
        storyPath,
      ]);
      const fields = stdout.trim().split("\t");
      expect(fields).toHaveLength(4);
      expect(fields[3]).toBe("1");
    },
    60_000,
  );

  it(
    "surfaces a gateway conflict from a stale tab as an inline error",
    async () => {
      const tabA = makeApp();
      el<HTMLInputElement>(tabA.root, "first-sentence").value = "there was sunshine .";
      submit(tabA.root, tabA.win, "start-form");
      await tabA.app.lastAction;
      submit(tabA.root, tabA.win, "keyword-form");
      await tabA.app.lastAction;
      expect(tabA.app.view?.phase).toBe("knowledge_ready");

      // a second tab attaches to the same session and sees knowledge_ready
      const tabB = makeApp();
      await tabB.app.attach(tabA.app.view!.session_id);
      expect(tabB.app.view?.phase).toBe("knowledge_ready");

      // tab A steps first; tab B's view is now stale
      el<HTMLButtonElement>(tabA.root, "generate").click();
      await tabA.app.lastAction;

      el<HTMLButtonElement>(tabB.root, "generate").click();
      await tabB.app.lastAction;
      expect(el<HTMLDivElement>(tabB.root, "error").hidden).toBe(false);
      expect(tabB.app.errorText).toContain("knowledge_ready");
    },
    60_000,
  );
});
