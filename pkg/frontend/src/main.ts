/** Cockpit bootstrap: one session, one render loop, one message path. */

import { CockpitView } from "./render.js";
import { CockpitSession } from "./session.js";

function gatewayUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("gateway");
  if (override !== null) {
    return override.startsWith("ws") ? override : `ws://${override}`;
  }
  return `ws://${window.location.hostname}:7447`;
}

const session = new CockpitSession({ url: gatewayUrl(), role: "operator" });
const view = new CockpitView(session);
session.connect();

// A steady repaint keeps the staleness banner honest even when no messages
// arrive at all.
window.setInterval(() => view.paint(), 100);
