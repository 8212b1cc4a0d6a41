/**
 * Blinded Likert scoring app.
 *
 * Three states: a start form (rater id + shuffle seed), the item loop, and a
 * completion screen linking to the CSV export. The server is the only source
 * of truth: an item advances only after the score POST is acknowledged, and
 * reloading resumes wherever the server says the rater left off. Items carry
 * no model or configuration identity by design; this app never requests it.
 */

interface ReviewItemView {
  item_token: string;
  material_text: string;
  profile_summary: string;
  position: number;
  total: number;
}

interface SessionInfo {
  session_id: string;
  total: number;
  scored: number;
}

interface CategorySpec {
  key: "redundancy" | "accuracy" | "completeness";
  title: string;
  hint: string;
}

const CATEGORIES: CategorySpec[] = [
  {
    key: "redundancy",
    title: "Redundancy",
    hint: "1 = repeats itself constantly · 5 = no unnecessary repetition",
  },
  {
    key: "accuracy",
    title: "Accuracy",
    hint: "1 = mostly incorrect · 5 = fully correct content",
  },
  {
    key: "completeness",
    title: "Completeness",
    hint: "1 = missing most essentials · 5 = covers everything needed",
  },
];

const app = (): void => {
  const root = document.getElementById("app");
  if (!root) return;

  let sessionId = "";
  let currentItem: ReviewItemView | null = null;
  let activeCategory = 0;
  let busy = false;

  // --- tiny markdown renderer (escape first, then transform) ---------------

  const escapeHtml = (raw: string): string =>
    raw
      .replace(/&/g, "&amp;")
      .replace(/</g, "&lt;")
      .replace(/>/g, "&gt;")
      .replace(/"/g, "&quot;")
      .replace(/'/g, "&#39;");

  const inlineMd = (line: string): string =>
    line.replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>");

  const renderMarkdown = (text: string): string => {
    const lines = escapeHtml(text.replace(/\\n/g, "\n")).split(/\r?\n/);
    const out: string[] = [];
    let listOpen = false;
    for (const raw of lines) {
      const line = raw.trim();
      const listMatch = line.match(/^(?:\d+\.|-)\s+(.*)$/);
      if (listMatch) {
        if (!listOpen) {
          out.push("<ol>");
          listOpen = true;
        }
        out.push(`<li>${inlineMd(listMatch[1])}</li>`);
        continue;
      }
      if (listOpen) {
        out.push("</ol>");
        listOpen = false;
      }
      if (line) out.push(`<p>${inlineMd(line)}</p>`);
    }
    if (listOpen) out.push("</ol>");
    return out.join("");
  };

  // --- API ------------------------------------------------------------------

  const api = async (path: string, init?: RequestInit): Promise<Response> => {
    const response = await fetch(path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok && response.status !== 204) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        if (body && body.detail) detail = `${detail}: ${body.detail}`;
      } catch {
        /* non-JSON error body */
      }
      throw new Error(detail);
    }
    return response;
  };

  // --- views ------------------------------------------------------------------

  const el = <K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    text?: string,
  ): HTMLElementTagNameMap[K] => {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
    if (text !== undefined) node.textContent = text;
    return node;
  };

  const clear = (): void => {
    root.textContent = "";
  };

  const showError = (message: string, retry: () => void): void => {
    const existing = root.querySelector(".error-banner");
    if (existing) existing.remove();
    const banner = el("div", { class: "error-banner", role: "alert" });
    banner.append(el("span", {}, `Request failed (${message}). `));
    const again = el("button", { type: "button" }, "Retry");
    again.addEventListener("click", () => {
      banner.remove();
      retry();
    });
    banner.append(again);
    root.prepend(banner);
  };

  const renderStart = (): void => {
    clear();
    const card = el("div", { class: "card" });
    card.append(el("h1", {}, "Material review"));
    card.append(el("p", {}, "Score each education text for redundancy, accuracy, "
      + "and completeness on a 1–5 scale. You will not be told how any text "
      + "was produced."));

    const raterField = el("label", { class: "field" }, "Rater ID");
    const raterInput = el("input", { id: "rater", autocomplete: "off" });
    raterField.append(raterInput);

    const seedField = el("label", { class: "field" }, "Session seed");
    const seedInput = el("input", { id: "seed", type: "number", value: "0" });
    seedField.append(seedInput);

    const startButton = el("button", { id: "start", type: "button" }, "Start session");
    startButton.addEventListener("click", () => {
      const raterId = raterInput.value.trim();
      if (!raterId) {
        showError("rater id is required", () => undefined);
        return;
      }
      void startSession(raterId, parseInt(seedInput.value || "0", 10) || 0);
    });

    card.append(raterField, seedField, startButton);
    root.append(card);
    raterInput.focus();
  };

  const renderDone = (total: number): void => {
    clear();
    const card = el("div", { class: "card" });
    card.append(el("h1", {}, "Session complete"));
    card.append(el("p", {}, `All ${total} items are scored. Thank you.`));
    const link = el("a", { id: "export-link", href: "/export.csv" },
      "Download all recorded scores (CSV)");
    card.append(link);
    root.append(card);
  };

  const selectedScores = (): Partial<Record<CategorySpec["key"], number>> => {
    const scores: Partial<Record<CategorySpec["key"], number>> = {};
    for (const category of CATEGORIES) {
      const picked = root.querySelector<HTMLInputElement>(
        `input[name="${category.key}"]:checked`);
      if (picked) scores[category.key] = parseInt(picked.value, 10);
    }
    return scores;
  };

  const refreshSubmitState = (): void => {
    const submit = root.querySelector<HTMLButtonElement>("#submit");
    if (!submit) return;
    const scores = selectedScores();
    submit.disabled = busy || CATEGORIES.some((c) => scores[c.key] === undefined);
  };

  const highlightActiveCategory = (): void => {
    root.querySelectorAll("fieldset").forEach((fs, i) => {
      fs.classList.toggle("active", i === activeCategory);
    });
  };

  const renderItem = (item: ReviewItemView): void => {
    clear();
    currentItem = item;
    activeCategory = 0;

    const progress = el("div", { class: "progress", id: "progress" },
      `Item ${item.position} of ${item.total}`);
    root.append(progress);

    const patient = el("div", { class: "card" });
    patient.append(el("h1", {}, "Patient context"));
    patient.append(el("div", { class: "profile-summary", id: "profile-summary" },
      item.profile_summary));
    root.append(patient);

    const material = el("div", { class: "card" });
    material.append(el("h1", {}, "Education material"));
    const body = el("div", { class: "material", id: "material" });
    body.innerHTML = renderMarkdown(item.material_text);
    material.append(body);
    root.append(material);

    const form = el("form", { class: "card", id: "score-form" });
    form.addEventListener("submit", (event) => event.preventDefault());
    for (const category of CATEGORIES) {
      const fieldset = el("fieldset");
      fieldset.append(el("legend", {}, category.title));
      fieldset.append(el("p", { class: "scale-hint" }, category.hint));
      const row = el("div", { class: "likert" });
      for (let value = 1; value <= 5; value += 1) {
        const label = el("label");
        const input = el("input", {
          type: "radio",
          name: category.key,
          value: String(value),
        });
        input.addEventListener("change", refreshSubmitState);
        label.append(input, el("span", {}, String(value)));
        row.append(label);
      }
      fieldset.append(row);
      form.append(fieldset);
    }
    const submit = el("button", { id: "submit", type: "button" }, "Submit and next");
    submit.disabled = true;
    submit.addEventListener("click", () => void submitScores());
    form.append(submit);
    form.append(el("p", { class: "keyboard-hint" },
      "Keyboard: press 1–5 to score the highlighted category and move on; "
      + "Enter submits once all three are set."));
    root.append(form);
    highlightActiveCategory();
  };

  // --- flow --------------------------------------------------------------------

  const startSession = async (raterId: string, seed: number): Promise<void> => {
    try {
      const response = await api("/sessions", {
        method: "POST",
        body: JSON.stringify({ rater_id: raterId, seed }),
      });
      const info = (await response.json()) as SessionInfo;
      sessionId = info.session_id;
      await advance();
    } catch (err) {
      showError(String(err instanceof Error ? err.message : err),
        () => void startSession(raterId, seed));
    }
  };

  const advance = async (): Promise<void> => {
    try {
      const response = await api(`/sessions/${sessionId}/next`);
      if (response.status === 204) {
        const total = currentItem ? currentItem.total : 0;
        currentItem = null;
        renderDone(total);
        return;
      }
      renderItem((await response.json()) as ReviewItemView);
    } catch (err) {
      showError(String(err instanceof Error ? err.message : err), () => void advance());
    }
  };

  const submitScores = async (): Promise<void> => {
    if (!currentItem || busy) return;
    const scores = selectedScores();
    if (CATEGORIES.some((c) => scores[c.key] === undefined)) return;
    busy = true;
    refreshSubmitState();
    const payload = { item_token: currentItem.item_token, ...scores };
    try {
      await api(`/sessions/${sessionId}/scores`, {
        method: "POST",
        body: JSON.stringify(payload),
      });
      busy = false;
      await advance();
    } catch (err) {
      // Rejected submission: keep the same item on screen with the message.
      busy = false;
      refreshSubmitState();
      showError(String(err instanceof Error ? err.message : err), () => undefined);
    }
  };

  // --- keyboard entry -------------------------------------------------------------

  document.addEventListener("keydown", (event) => {
    if (!currentItem) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" && (target as HTMLInputElement).type === "text")) {
      return;
    }
    if (event.key >= "1" && event.key <= "5") {
      const category = CATEGORIES[activeCategory];
      const input = root.querySelector<HTMLInputElement>(
        `input[name="${category.key}"][value="${event.key}"]`);
      if (input) {
        input.checked = true;
        refreshSubmitState();
        activeCategory = Math.min(activeCategory + 1, CATEGORIES.length - 1);
        highlightActiveCategory();
        event.preventDefault();
      }
    } else if (event.key === "Enter") {
      const submit = root.querySelector<HTMLButtonElement>("#submit");
      if (submit && !submit.disabled) {
        void submitScores();
        event.preventDefault();
      }
    }
  });

  renderStart();
};

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", app);
} else {
  app();
}
