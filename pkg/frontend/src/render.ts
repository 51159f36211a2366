/**
 * DOM bindings: the joint mirror view (leader vs follower bars plus a 2D
 * sketch), mode badge, pedal, leader sliders, episode controls, and the
 * intervention chart. All state lives in the CockpitSession; this module
 * only paints it.
 */

import { armSketchSvg } from "./sketch.js";
import { chartData, interventionChartSvg } from "./charts.js";
import { CockpitSession } from "./session.js";
import { episodeStatsRows, parseEpisodeFile, ParsedEpisode } from "./stats.js";

const JOINT_RANGE = Math.PI;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function fmt(x: number): string {
  return (x >= 0 ? "+" : "") + x.toFixed(3);
}

export class CockpitView {
  private session: CockpitSession;
  private sliders: HTMLInputElement[] = [];
  private gripperSlider: HTMLInputElement;
  private loadedEpisodes: ParsedEpisode[] = [];

  constructor(session: CockpitSession) {
    this.session = session;
    this.gripperSlider = el<HTMLInputElement>("gripper-slider");
    this.wireControls();
  }

  private wireControls(): void {
    const pedal = el<HTMLButtonElement>("pedal");
    pedal.addEventListener("click", () => {
      this.session.sendPedal(!this.session.pedalEngaged);
      this.paint();
    });
    el<HTMLButtonElement>("episode-start").addEventListener("click", () =>
      this.session.sendEpisodeEvent("start")
    );
    el<HTMLButtonElement>("episode-end").addEventListener("click", () =>
      this.session.sendEpisodeEvent("end")
    );
    el<HTMLInputElement>("episode-files").addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      void this.loadEpisodeFiles(input.files);
    });
    document.addEventListener("keydown", (ev) => {
      if (ev.code === "Space" && !ev.repeat) {
        ev.preventDefault();
        this.session.sendPedal(!this.session.pedalEngaged);
        return;
      }
      this.handleJogKey(ev.key);
    });
  }

  /** Keyboard leader control: q/a jog joint 1, w/s joint 2, and so on.
   * Goes through the same pedal-gated path as the sliders. */
  private handleJogKey(key: string): void {
    const JOG_KEYS = ["q", "w", "e", "r", "t", "y"];
    const lower = key.toLowerCase();
    const downKeys = ["a", "s", "d", "f", "g", "h"];
    let joint = JOG_KEYS.indexOf(lower);
    let direction = 1;
    if (joint < 0) {
      joint = downKeys.indexOf(lower);
      direction = -1;
    }
    if (joint < 0 || joint >= this.sliders.length) {
      return;
    }
    const slider = this.sliders[joint]!;
    const next = Number(slider.value) + direction * 0.05;
    slider.value = String(Math.max(-JOINT_RANGE, Math.min(JOINT_RANGE, next)));
    this.pushLeaderCommand();
  }

  /** Build one slider per joint once the first state arrives. */
  private ensureSliders(jointCount: number): void {
    if (this.sliders.length === jointCount) {
      return;
    }
    const host = el<HTMLDivElement>("sliders");
    host.innerHTML = "";
    this.sliders = [];
    for (let i = 0; i < jointCount; i += 1) {
      const row = document.createElement("label");
      row.className = "slider-row";
      row.textContent = `j${i + 1} `;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(-JOINT_RANGE);
      slider.max = String(JOINT_RANGE);
      slider.step = "0.005";
      slider.value = "0";
      slider.addEventListener("input", () => this.pushLeaderCommand());
      row.appendChild(slider);
      host.appendChild(row);
      this.sliders.push(slider);
    }
    this.gripperSlider.addEventListener("input", () => this.pushLeaderCommand());
  }

  /** Sliders edit the local draft; the session gates actual sending. */
  private pushLeaderCommand(): void {
    const q = this.sliders.map((s) => Number(s.value));
    this.session.sendLeaderCmd(q, Number(this.gripperSlider.value));
  }

  private async loadEpisodeFiles(files: FileList | null): Promise<void> {
    if (files === null) {
      return;
    }
    const episodes: ParsedEpisode[] = [];
    for (const file of Array.from(files)) {
      episodes.push(parseEpisodeFile(await file.text()));
    }
    this.loadedEpisodes = episodes;
    this.paintChart();
  }

  paint(): void {
    const state = this.session.latestState;
    el("banner").hidden = !this.session.showBanner();
    el("connection").textContent = this.session.connection;
    const badge = el("mode-badge");
    badge.textContent = state?.mode ?? "–";
    badge.className = `badge mode-${state?.mode ?? "unknown"}`;
    const pedal = el<HTMLButtonElement>("pedal");
    pedal.textContent = this.session.pedalEngaged ? "release pedal" : "press pedal";
    pedal.classList.toggle("engaged", this.session.pedalEngaged);
    if (state === null) {
      return;
    }
    this.ensureSliders(state.leader_q.length);
    if (!this.session.pedalEngaged) {
      // sliders track the live leader while the policy drives
      state.leader_q.forEach((value, i) => {
        const slider = this.sliders[i];
        if (slider !== undefined) {
          slider.value = String(value);
        }
      });
      this.gripperSlider.value = String(state.gripper);
    }
    this.paintBars(state.leader_q, state.follower_q);
    el("sketch").innerHTML = armSketchSvg(state.leader_q, state.follower_q, 240);
    el("task-name").textContent = state.task ?? "–";
    el("episode-id").textContent = state.episode_id ?? "idle";
    this.paintEpisodeList();
    this.paintErrors();
  }

  private paintBars(leader: number[], follower: number[]): void {
    const host = el<HTMLDivElement>("joint-bars");
    const rows = leader.map((lq, i) => {
      const fq = follower[i] ?? 0;
      const leftPct = (50 + (lq / JOINT_RANGE) * 50).toFixed(1);
      const rightPct = (50 + (fq / JOINT_RANGE) * 50).toFixed(1);
      const gap = Math.abs(lq - fq);
      return (
        `<div class="bar-row${gap > 0.12 ? " desynced" : ""}">` +
        `<span class="bar-label">j${i + 1}</span>` +
        `<div class="bar"><span class="tick leader" style="left:${leftPct}%"></span>` +
        `<span class="tick follower" style="left:${rightPct}%"></span></div>` +
        `<span class="bar-value">L ${fmt(lq)} · F ${fmt(fq)}</span></div>`
      );
    });
    host.innerHTML = rows.join("");
  }

  private paintEpisodeList(): void {
    const host = el<HTMLUListElement>("episode-list");
    const items = this.session.episodes.slice(-12).map((ev) => {
      const outcome = ev.event === "end" ? ` → ${ev.outcome ?? "?"}` : " started";
      return `<li>${ev.id}${outcome}</li>`;
    });
    host.innerHTML = items.join("");
  }

  private paintErrors(): void {
    const host = el<HTMLDivElement>("errors");
    host.innerHTML = this.session.errors
      .slice(-3)
      .map((e) => `<div class="error-row">${e.code}: ${e.detail}</div>`)
      .join("");
  }

  private paintChart(): void {
    const rows = episodeStatsRows(this.loadedEpisodes);
    el("chart").innerHTML = interventionChartSvg(rows);
    el("chart-summary").textContent = rows
      .map((r) => `${r.id}: ${chartData([r])[0]?.mean}`)
      .join("   ");
  }
}
