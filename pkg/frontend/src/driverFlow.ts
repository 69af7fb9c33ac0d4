// Driver flow state machine: affiliation -> consent -> link ->
// waiting_for_data -> survey -> summary. Steps only ever advance; the
// survey step is reachable only with a live invite token, and the
// summary only after submission (the API enforces both; the machine
// mirrors the gating so the UI cannot even try).

import { ApiClient, ApiRequestError } from "./api.js";
import type {
  Affiliation,
  PersonalSummary,
  StatusResponse,
  SurveyAnswers,
  SurveyDefinition,
} from "./types.js";

export type FlowStep =
  | "affiliation"
  | "consent"
  | "link"
  | "waiting_for_data"
  | "survey"
  | "summary";

export const STEP_ORDER: FlowStep[] = [
  "affiliation",
  "consent",
  "link",
  "waiting_for_data",
  "survey",
  "summary",
];

export class FlowError extends Error {}

export interface AffiliationChoice {
  affiliation_id?: string;
  affiliation_name?: string;
  region_tag?: string;
  none?: boolean; // affiliation is optional at signup
}

export class DriverFlow {
  step: FlowStep = "affiliation";
  affiliations: Affiliation[] = [];
  choice: AffiliationChoice | null = null;
  driverId: string | null = null;
  sessionToken: string | null = null; // session-scoped only, never persisted
  status: StatusResponse | null = null;
  surveyDefinition: SurveyDefinition | null = null;
  surveyToken: string | null = null;
  surveySubmitted = false;
  personalSummary: PersonalSummary | null = null;
  deleted = false;
  lastError: string | null = null;

  constructor(private api: ApiClient) {}

  private advance(step: FlowStep): void {
    const from = STEP_ORDER.indexOf(this.step);
    const to = STEP_ORDER.indexOf(step);
    if (to < from) {
      throw new FlowError(`steps advance monotonically (${this.step} -> ${step})`);
    }
    this.step = step;
  }

  // screen 1: pick an affiliation from the predefined list (or none/new)
  async loadAffiliations(): Promise<Affiliation[]> {
    const body = await this.api.listAffiliations();
    this.affiliations = body.affiliations;
    return this.affiliations;
  }

  chooseAffiliation(choice: AffiliationChoice): void {
    if (this.step !== "affiliation") throw new FlowError("affiliation already chosen");
    this.choice = choice;
    this.advance("consent");
  }

  // screen 2: review and give consent; declining halts the flow here
  async submitConsent(profile: {
    display_name: string;
    phone: string;
    consented: boolean;
    consent_version?: string;
  }): Promise<void> {
    if (this.step !== "consent") throw new FlowError("not at the consent step");
    if (!profile.consented) {
      this.lastError = "consent_required";
      return; // flow halts at consent
    }
    const choice = this.choice ?? { none: true };
    const resp = await this.api.enroll({
      display_name: profile.display_name,
      phone: profile.phone,
      affiliation_id: choice.affiliation_id,
      affiliation_name: choice.affiliation_name,
      region_tag: choice.region_tag,
      consent: { consented: true, consent_version: profile.consent_version ?? "v1" },
    });
    this.driverId = resp.driver_id;
    this.sessionToken = resp.token;
    this.lastError = null;
    this.advance("link");
  }

  // screen 3: link the rideshare account through the payroll provider
  async linkAccount(body: {
    account_id?: string;
    seed?: number;
    params?: Record<string, unknown>;
  }): Promise<void> {
    if (this.step !== "link") throw new FlowError("not at the link step");
    if (!this.driverId || !this.sessionToken) throw new FlowError("no session");
    await this.api.link(this.driverId, this.sessionToken, body);
    this.advance("waiting_for_data");
  }

  // waiting screen: poll sync progress until the invite goes out
  async refreshStatus(): Promise<StatusResponse> {
    if (!this.sessionToken) throw new FlowError("no session");
    this.status = await this.api.status(this.sessionToken);
    return this.status;
  }

  get surveyInvited(): boolean {
    return Boolean(this.status?.survey_invited);
  }

  // screen 4: the survey, opened from the texted single-use link
  async enterSurvey(surveyToken: string): Promise<SurveyDefinition> {
    if (STEP_ORDER.indexOf(this.step) < STEP_ORDER.indexOf("waiting_for_data")) {
      throw new FlowError("survey is unreachable before data sync begins");
    }
    if (this.surveySubmitted) throw new FlowError("survey already submitted");
    // a live token is the proof an invite exists; the API 410s otherwise
    this.surveyDefinition = await this.api.fetchSurvey(surveyToken);
    this.surveyToken = surveyToken;
    this.advance("survey");
    return this.surveyDefinition;
  }

  // client-side validation mirroring the API's 422 codes
  validateAnswers(answers: SurveyAnswers): string[] {
    const problems: string[] = [];
    for (const key of ["estimated_take_rate_pct", "fair_take_rate_pct"] as const) {
      const value = answers[key];
      if (typeof value !== "number" || Number.isNaN(value) || value < 0 || value > 100) {
        problems.push(`${key} must be a number between 0 and 100`);
      }
    }
    if (answers.factors_text.length > 2000) {
      problems.push("factors_text must be at most 2000 characters");
    }
    return problems;
  }

  async submitSurvey(answers: SurveyAnswers): Promise<void> {
    if (this.step !== "survey" || !this.surveyToken) {
      throw new FlowError("not at the survey step");
    }
    const problems = this.validateAnswers(answers);
    if (problems.length) {
      this.lastError = problems.join("; ");
      throw new FlowError(this.lastError);
    }
    await this.api.submitSurvey(this.surveyToken, answers);
    this.surveySubmitted = true;
    this.lastError = null;
  }

  // screen 5: the personal summary, unlocked by submission
  async loadSummary(): Promise<PersonalSummary> {
    if (!this.sessionToken) throw new FlowError("no session");
    if (!this.surveySubmitted) {
      throw new FlowError("summary is unreachable before survey submission");
    }
    const resp = await this.api.summary(this.sessionToken);
    if (resp.locked || !resp.summary) {
      throw new FlowError(resp.message ?? "summary still locked");
    }
    this.personalSummary = resp.summary;
    this.advance("summary");
    return this.personalSummary;
  }

  // deletion is reachable from the summary screen
  async requestDeletion(): Promise<Record<string, number>> {
    if (this.step !== "summary") throw new FlowError("deletion offered on the summary screen");
    if (!this.sessionToken) throw new FlowError("no session");
    const receipt = await this.api.requestDeletion(this.sessionToken);
    this.deleted = true;
    this.sessionToken = null;
    return receipt.removed;
  }

  describeError(err: unknown): string {
    if (err instanceof ApiRequestError) return `${err.code}: ${err.message}`;
    if (err instanceof Error) return err.message;
    return String(err);
  }
}
