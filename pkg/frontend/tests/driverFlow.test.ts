import { beforeEach, describe, expect, test } from "vitest";

import type { ApiClient } from "../src/api.js";
import { ApiRequestError } from "../src/api.js";
import { DriverFlow, FlowError, STEP_ORDER } from "../src/driverFlow.js";

function fakeApi(overrides: Partial<Record<string, unknown>> = {}): ApiClient {
  const base = {
    listAffiliations: async () => ({
      affiliations: [{ affiliation_id: "aff-1", name: "Union A", region_tag: "CO" }],
    }),
    enroll: async () => ({ driver_id: "drv-1", token: "tok-1", affiliation_id: "aff-1" }),
    link: async () => ({ driver_id: "drv-1", account_id: "acct-1", phase: "backfilling" }),
    status: async () => ({
      driver_id: "drv-1",
      phase: "synced",
      activities_ingested: 40,
      survey_invited: true,
    }),
    fetchSurvey: async () => ({
      survey_id: "s",
      version: "1",
      title: "t",
      questions: [],
    }),
    submitSurvey: async () => ({}),
    summary: async () => ({
      locked: false,
      summary: {
        driver_id: "drv-1",
        no_analyzable_rides: false,
        n_rides: 12,
        average_take_rate_pct: 27.5,
        highest_take_rate_pct: 40.1,
        lowest_take_rate_pct: 11.2,
      },
    }),
    requestDeletion: async () => ({
      driver_id: "drv-1",
      deleted_at: "2024-01-01T00:00:00Z",
      removed: { pii: 1, activities: 12, surveys: 1, sync: 1 },
    }),
  };
  return { ...base, ...overrides } as unknown as ApiClient;
}

async function completeTo(flow: DriverFlow, step: string): Promise<void> {
  await flow.loadAffiliations();
  flow.chooseAffiliation({ affiliation_id: "aff-1" });
  if (step === "consent") return;
  await flow.submitConsent({ display_name: "D", phone: "+1", consented: true });
  if (step === "link") return;
  await flow.linkAccount({});
  if (step === "waiting_for_data") return;
  await flow.refreshStatus();
  await flow.enterSurvey("a".repeat(32));
  if (step === "survey") return;
  await flow.submitSurvey({
    estimated_take_rate_pct: 55,
    fair_take_rate_pct: 21,
    factors_text: "",
  });
  await flow.loadSummary();
}

describe("driver flow state machine", () => {
  let flow: DriverFlow;

  beforeEach(() => {
    flow = new DriverFlow(fakeApi());
  });

  test("happy path advances through all five screens in order", async () => {
    const visited: string[] = [flow.step];
    await flow.loadAffiliations();
    flow.chooseAffiliation({ affiliation_id: "aff-1" });
    visited.push(flow.step);
    await flow.submitConsent({ display_name: "D", phone: "+1", consented: true });
    visited.push(flow.step);
    await flow.linkAccount({});
    visited.push(flow.step);
    await flow.refreshStatus();
    await flow.enterSurvey("a".repeat(32));
    visited.push(flow.step);
    await flow.submitSurvey({
      estimated_take_rate_pct: 55,
      fair_take_rate_pct: 21,
      factors_text: "airport",
    });
    await flow.loadSummary();
    visited.push(flow.step);
    expect(visited).toEqual(STEP_ORDER);
    expect(flow.personalSummary?.average_take_rate_pct).toBe(27.5);
  });

  test("consent declined halts the flow at consent", async () => {
    await completeTo(flow, "consent");
    await flow.submitConsent({ display_name: "D", phone: "+1", consented: false });
    expect(flow.step).toBe("consent");
    expect(flow.lastError).toBe("consent_required");
    expect(flow.sessionToken).toBeNull();
  });

  test("survey unreachable before data sync begins", async () => {
    await completeTo(flow, "consent");
    await expect(flow.enterSurvey("a".repeat(32))).rejects.toThrow(FlowError);
  });

  test("survey unreachable when the token is dead (no invite)", async () => {
    const api = fakeApi({
      fetchSurvey: async () => {
        throw new ApiRequestError(410, "gone", "survey link is not available");
      },
    });
    const f = new DriverFlow(api);
    await completeTo(f, "waiting_for_data");
    await expect(f.enterSurvey("b".repeat(32))).rejects.toThrow(ApiRequestError);
    expect(f.step).toBe("waiting_for_data");
  });

  test("summary unreachable before survey submission", async () => {
    await completeTo(flow, "survey");
    await expect(flow.loadSummary()).rejects.toThrow(/before survey submission/);
    expect(flow.step).toBe("survey");
  });

  test("steps never move backwards", async () => {
    await completeTo(flow, "link");
    expect(() => flow.chooseAffiliation({ none: true })).toThrow(FlowError);
  });

  test("client-side validation mirrors the API bounds", () => {
    expect(
      flow.validateAnswers({
        estimated_take_rate_pct: 101,
        fair_take_rate_pct: 20,
        factors_text: "",
      }),
    ).toHaveLength(1);
    expect(
      flow.validateAnswers({
        estimated_take_rate_pct: 55,
        fair_take_rate_pct: -1,
        factors_text: "",
      }),
    ).toHaveLength(1);
    expect(
      flow.validateAnswers({
        estimated_take_rate_pct: 55,
        fair_take_rate_pct: 21,
        factors_text: "x".repeat(2001),
      }),
    ).toHaveLength(1);
    expect(
      flow.validateAnswers({
        estimated_take_rate_pct: 55,
        fair_take_rate_pct: 21,
        factors_text: "fine",
      }),
    ).toHaveLength(0);
  });

  test("out-of-range answers never reach the API", async () => {
    let called = false;
    const api = fakeApi({
      submitSurvey: async () => {
        called = true;
        return {};
      },
    });
    const f = new DriverFlow(api);
    await completeTo(f, "survey");
    await expect(
      f.submitSurvey({
        estimated_take_rate_pct: 250,
        fair_take_rate_pct: 21,
        factors_text: "",
      }),
    ).rejects.toThrow(FlowError);
    expect(called).toBe(false);
  });

  test("deletion is reachable from the summary screen only", async () => {
    await completeTo(flow, "survey");
    await expect(flow.requestDeletion()).rejects.toThrow(FlowError);
    await flow.submitSurvey({
      estimated_take_rate_pct: 55,
      fair_take_rate_pct: 21,
      factors_text: "",
    });
    await flow.loadSummary();
    const removed = await flow.requestDeletion();
    expect(removed.activities).toBe(12);
    expect(flow.deleted).toBe(true);
    expect(flow.sessionToken).toBeNull();
  });
});
