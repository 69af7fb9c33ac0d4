// Browser bootstrap: hash routing between the driver flow and the
// organizer dashboard, with event delegation into the state machines.
// The driver token lives in sessionStorage only.

import { ApiClient } from "./api.js";
import { Dashboard, EMPTY_FILTER } from "./dashboard.js";
import { DriverFlow } from "./driverFlow.js";
import { renderDashboard, renderDriverScreen } from "./render.js";
import type { SurveyAnswers } from "./types.js";

const api = new ApiClient(
  (window as unknown as { API_BASE_URL?: string }).API_BASE_URL ?? window.location.origin,
);

const root = document.getElementById("app") as HTMLElement;
const flow = new DriverFlow(api);
let dashboard: Dashboard | null = null;

function rerenderDriver(): void {
  root.innerHTML = renderDriverScreen(flow);
}

async function rerenderDashboard(): Promise<void> {
  if (!dashboard) return;
  const affiliations = (await api.listAffiliations()).affiliations;
  root.innerHTML = renderDashboard(dashboard, affiliations);
}

function field(name: string): HTMLInputElement | HTMLSelectElement | HTMLTextAreaElement {
  return root.querySelector(`[name="${name}"]`) as HTMLInputElement;
}

async function handleAction(action: string): Promise<void> {
  try {
    switch (action) {
      case "choose-affiliation": {
        const id = (field("affiliation_id") as HTMLSelectElement).value;
        const name = (field("affiliation_name") as HTMLInputElement).value.trim();
        flow.chooseAffiliation(
          name ? { affiliation_name: name } : id ? { affiliation_id: id } : { none: true },
        );
        break;
      }
      case "submit-consent":
      case "decline-consent": {
        await flow.submitConsent({
          display_name: (field("display_name") as HTMLInputElement).value,
          phone: (field("phone") as HTMLInputElement).value,
          consented:
            action === "submit-consent" &&
            (field("consented") as HTMLInputElement).checked,
        });
        if (flow.sessionToken) {
          sessionStorage.setItem("driver_token", flow.sessionToken);
        }
        break;
      }
      case "link-account":
        await flow.linkAccount({});
        await flow.refreshStatus();
        break;
      case "refresh-status":
        await flow.refreshStatus();
        break;
      case "submit-survey": {
        const answers: SurveyAnswers = {
          estimated_take_rate_pct: Number(
            (field("estimated_take_rate_pct") as HTMLInputElement).value,
          ),
          fair_take_rate_pct: Number(
            (field("fair_take_rate_pct") as HTMLInputElement).value,
          ),
          factors_text: (field("factors_text") as HTMLTextAreaElement).value,
        };
        await flow.submitSurvey(answers);
        await flow.loadSummary();
        break;
      }
      case "request-deletion":
        await flow.requestDeletion();
        sessionStorage.removeItem("driver_token");
        break;
    }
  } catch (err) {
    flow.lastError = flow.describeError(err);
  }
  rerenderDriver();
}

async function route(): Promise<void> {
  const hash = window.location.hash;
  if (hash.startsWith("#survey/")) {
    const token = hash.slice("#survey/".length);
    try {
      await flow.enterSurvey(token);
    } catch (err) {
      flow.lastError = flow.describeError(err);
    }
    rerenderDriver();
    return;
  }
  if (hash.startsWith("#dashboard")) {
    const adminKey = sessionStorage.getItem("admin_key") ?? prompt("Admin key") ?? "";
    sessionStorage.setItem("admin_key", adminKey);
    dashboard = dashboard ?? new Dashboard(api, adminKey);
    try {
      await dashboard.load(EMPTY_FILTER);
    } catch {
      // render with the error captured in dashboard state
    }
    await rerenderDashboard();
    return;
  }
  await flow.loadAffiliations();
  rerenderDriver();
}

root.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("[data-action]");
  if (!target) return;
  event.preventDefault();
  const action = target.getAttribute("data-action")!;
  if (action === "apply-filters" && dashboard) {
    const select = field("affiliation_ids") as HTMLSelectElement;
    const chosen = Array.from(select.selectedOptions).map((o) => o.value);
    const categories: string[] = [];
    if ((field("cat_airport") as HTMLInputElement).checked) categories.push("airport");
    if ((field("cat_surge") as HTMLInputElement).checked) categories.push("surge");
    dashboard
      .load({
        affiliation_ids: chosen,
        date_from: (field("date_from") as HTMLInputElement).value || null,
        date_to: (field("date_to") as HTMLInputElement).value || null,
        categories,
      })
      .finally(() => void rerenderDashboard());
    return;
  }
  void handleAction(action);
});

window.addEventListener("hashchange", () => void route());
void route();
