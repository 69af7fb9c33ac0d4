// Pure HTML renderers for the driver screens and the dashboard. They
// take state objects and return markup; main.ts wires them to the DOM.

import {
  comparisonHistogram,
  perceptionChart,
  ratePerMileChart,
  weeklyLineChart,
} from "./charts.js";
import type { Dashboard } from "./dashboard.js";
import type { DriverFlow } from "./driverFlow.js";
import { escapeHtml, fmtCount, fmtP, fmtPct, fmtUsd } from "./format.js";
import type { Affiliation, GroupSummary } from "./types.js";

export function renderDriverScreen(flow: DriverFlow): string {
  const error = flow.lastError
    ? `<p class="error" data-role="error">${escapeHtml(flow.lastError)}</p>`
    : "";
  switch (flow.step) {
    case "affiliation":
      return renderAffiliationScreen(flow.affiliations) + error;
    case "consent":
      return renderConsentScreen() + error;
    case "link":
      return renderLinkScreen() + error;
    case "waiting_for_data":
      return renderWaitingScreen(flow) + error;
    case "survey":
      return renderSurveyScreen(flow) + error;
    case "summary":
      return renderSummaryScreen(flow) + error;
  }
}

function renderAffiliationScreen(affiliations: Affiliation[]): string {
  const options = affiliations
    .map(
      (a) =>
        `<option value="${escapeHtml(a.affiliation_id)}">${escapeHtml(a.name)}</option>`,
    )
    .join("");
  return `
<section data-screen="affiliation">
  <h2>1 · Your organization</h2>
  <p>Optionally select an affiliation from the list, or enter a new one.</p>
  <select name="affiliation_id"><option value="">(none)</option>${options}</select>
  <input name="affiliation_name" placeholder="…or a new organization name">
  <button data-action="choose-affiliation">Continue</button>
</section>`;
}

function renderConsentScreen(): string {
  return `
<section data-screen="consent">
  <h2>2 · Review and consent</h2>
  <p>Your trip and pay records will be stored with your personal details kept
  in a separate, restricted store. Only you can see your own rides; organizers
  see aggregates only. You can delete everything at any time.</p>
  <input name="display_name" placeholder="Name">
  <input name="phone" placeholder="Mobile number (for the survey text)">
  <label><input type="checkbox" name="consented"> I consent to sharing my data</label>
  <button data-action="submit-consent">Agree and continue</button>
  <button data-action="decline-consent">Decline</button>
</section>`;
}

function renderLinkScreen(): string {
  return `
<section data-screen="link">
  <h2>3 · Link your rideshare account</h2>
  <p>Connect through the payroll-data provider to authorize access to your
  historical and ongoing trip data.</p>
  <button data-action="link-account">Connect account</button>
</section>`;
}

function renderWaitingScreen(flow: DriverFlow): string {
  const n = flow.status?.activities_ingested ?? 0;
  const phase = flow.status?.phase ?? "linked";
  const invited = flow.surveyInvited
    ? `<p data-role="invited">Check your texts: your survey link is ready.</p>`
    : `<p>We will text you a survey link once enough data has arrived.</p>`;
  return `
<section data-screen="waiting_for_data">
  <h2>4 · Syncing your data</h2>
  <p data-role="sync">Phase: ${escapeHtml(phase)} · ${fmtCount(n)} activities so far</p>
  ${invited}
  <button data-action="refresh-status">Refresh</button>
</section>`;
}

function renderSurveyScreen(flow: DriverFlow): string {
  const def = flow.surveyDefinition;
  if (!def) return `<section data-screen="survey"><p>Loading survey…</p></section>`;
  const fields = def.questions
    .map((q) => {
      const label = `<label>${escapeHtml(q.text)}</label>`;
      if (q.answer_type === "percentage") {
        return `${label}<input type="number" name="${escapeHtml(q.key)}" min="0" max="100" step="0.1">`;
      }
      return `${label}<textarea name="${escapeHtml(q.key)}" maxlength="${q.max_length ?? 2000}"></textarea>`;
    })
    .join("\n");
  return `
<section data-screen="survey">
  <h2>Survey · before you see your numbers</h2>
  ${fields}
  <button data-action="submit-survey">Submit answers</button>
</section>`;
}

function renderSummaryScreen(flow: DriverFlow): string {
  if (flow.deleted) {
    return `<section data-screen="summary"><p data-role="deleted">
      All of your data has been deleted. Thank you for participating.</p></section>`;
  }
  const s = flow.personalSummary;
  if (!s) return `<section data-screen="summary"><p>Loading…</p></section>`;
  if (s.no_analyzable_rides) {
    return `
<section data-screen="summary">
  <h2>5 · Your take rates</h2>
  <p data-role="no-rides">None of your rides were analyzable after cleaning.</p>
  <button data-action="request-deletion">Delete all my data</button>
</section>`;
  }
  return `
<section data-screen="summary">
  <h2>5 · Your take rates</h2>
  <p>Across <span data-role="n-rides">${fmtCount(s.n_rides)}</span> analyzed rides the
  platform kept on average
  <strong data-role="avg">${fmtPct(s.average_take_rate_pct)}</strong> of the rider price
  (excluding tips), at most
  <strong data-role="high">${fmtPct(s.highest_take_rate_pct)}</strong> and at least
  <strong data-role="low">${fmtPct(s.lowest_take_rate_pct)}</strong>.</p>
  <button data-action="request-deletion">Delete all my data</button>
</section>`;
}

// -- dashboard -----------------------------------------------------------

export function summaryTable(rows: GroupSummary[]): string {
  const head = [
    "Type",
    "Drivers",
    "Rides",
    "Distance (miles)",
    "Duration (minutes)",
    "Ride Price ($)",
    "Fees ($)",
    "Base Pay ($)",
    "Tips ($)",
    "Take Rate (Average) (%)",
    "Take Rate (Ratio of Means) (%)",
  ]
    .map((h) => `<th>${escapeHtml(h)}</th>`)
    .join("");
  const body = rows
    .map(
      (r) => `<tr>
  <td>${escapeHtml(r.group)}</td>
  <td>${fmtCount(r.n_drivers)}</td>
  <td>${fmtCount(r.n_rides)}</td>
  <td>${r.distance_miles_mean}</td>
  <td>${r.duration_minutes_mean}</td>
  <td>${fmtUsd(r.rider_price_mean_usd)}</td>
  <td>${fmtUsd(r.fees_mean_usd)}</td>
  <td>${fmtUsd(r.base_pay_mean_usd)}</td>
  <td>${fmtUsd(r.tips_mean_usd)}</td>
  <td>${fmtPct(r.take_rate_mean_of_ratios_pct)}</td>
  <td>${fmtPct(r.take_rate_ratio_of_means_pct)}</td>
</tr>`,
    )
    .join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

export function renderDashboard(dash: Dashboard, affiliations: Affiliation[]): string {
  const options = affiliations
    .map((a) => {
      const selected = dash.filter.affiliation_ids.includes(a.affiliation_id)
        ? " selected"
        : "";
      return `<option value="${escapeHtml(a.affiliation_id)}"${selected}>${escapeHtml(a.name)}</option>`;
    })
    .join("");
  const controls = `
<form data-role="filters">
  <select name="affiliation_ids" multiple>${options}</select>
  <input type="date" name="date_from" value="${dash.filter.date_from ?? ""}">
  <input type="date" name="date_to" value="${dash.filter.date_to ?? ""}">
  <label><input type="checkbox" name="cat_airport"${dash.filter.categories.includes("airport") ? " checked" : ""}> airport only</label>
  <label><input type="checkbox" name="cat_surge"${dash.filter.categories.includes("surge") ? " checked" : ""}> surge only</label>
  <button data-action="apply-filters">Apply</button>
</form>`;
  if (!dash.data) {
    return `${controls}<p data-role="empty">${dash.loading ? "Loading…" : "No data loaded."}</p>`;
  }
  const d = dash.data;
  const groups = Object.keys(d.summaries).sort();
  if (!groups.length) {
    return `${controls}
<p class="meta" data-role="digest">pipeline digest ${escapeHtml(d.digest)}</p>
<p data-role="empty">No retained rides match these filters.</p>`;
  }
  const comparisons = Object.keys(d.comparisons)
    .sort()
    .map((key) => {
      const comp = d.comparisons[key];
      const badge = dash.badge(comp);
      const badgeHtml = badge
        ? `<span class="badge" data-role="badge-${key}">${escapeHtml(badge)}</span>`
        : "";
      return `
<h3>${escapeHtml(comp.label_a)} vs ${escapeHtml(comp.label_b)} ${badgeHtml}</h3>
<p class="meta">${escapeHtml(comp.test_name)} · ${fmtP(comp.p_value)} ·
mode ${fmtPct(comp.mode_a_pct)} vs ${fmtPct(comp.mode_b_pct)}
(bin ${comp.bin_width_pct} pp)</p>
${comparisonHistogram(comp)}`;
    })
    .join("\n");
  return `${controls}
<p class="meta" data-role="digest">pipeline digest ${escapeHtml(d.digest)}</p>
<h3>Summary</h3>
${summaryTable(groups.map((g) => d.summaries[g]))}
<h3>Take rate over time</h3>
${weeklyLineChart(d.weekly_series)}
${comparisons}
<h3>Perception vs measured</h3>
${perceptionChart(d.perception)}
<h3>Pay per mile</h3>
${ratePerMileChart(d.rate_per_mile)}
<p>
  <a data-role="csv-download" href="${escapeHtml(dash.csvDownloadUrl())}">Download rides CSV</a>
  <a data-role="ndjson-download" href="${escapeHtml(dash.ndjsonDownloadUrl())}">Download NDJSON</a>
</p>`;
}
