/** DOM rendering: triplet layout, fixation, break, done, and error screens. */

import { ItemRef, QuestionPayload } from "./api.js";
import { SessionView, UiSessionState } from "./session.js";

export interface RenderOptions {
  /** Page background; default approximates a 0.32 linear grey in sRGB. */
  background?: string;
  /** Stimulus size on screen in CSS pixels; a study parameter, not a claim
   *  of controlled visual angle. */
  imagePixels?: number;
  /** Called when a stimulus image fails to load. */
  onAssetError?: (label: string) => void;
}

const IMAGE_LABEL = /\.(png|jpe?g|gif|webp|svg)$/i;

export class DomView implements SessionView {
  private readonly progress: HTMLElement;
  private readonly stage: HTMLElement;
  private readonly opts: Required<Omit<RenderOptions, "onAssetError">> &
    Pick<RenderOptions, "onAssetError">;

  constructor(private readonly root: HTMLElement, opts: RenderOptions = {}) {
    this.opts = {
      background: opts.background ?? "#999999",
      imagePixels: opts.imagePixels ?? 256,
      onAssetError: opts.onAssetError,
    };
    root.classList.add("survey-root");
    root.style.backgroundColor = this.opts.background;
    root.textContent = "";
    this.progress = document.createElement("div");
    this.progress.className = "progress";
    this.stage = document.createElement("div");
    this.stage.className = "stage";
    root.append(this.progress, this.stage);
  }

  showFixation(state: UiSessionState): void {
    this.setProgress(state);
    const rect = document.createElement("div");
    rect.className = "fixation";
    rect.style.width = "20px";
    rect.style.height = "20px";
    rect.style.backgroundColor = "#ffffff";
    rect.style.margin = "40vh auto 0";
    this.swap(rect);
  }

  showQuestion(
    state: UiSessionState,
    q: QuestionPayload,
    onChoice: (choice: "left" | "right") => void,
  ): void {
    this.setProgress(state);
    const layout = document.createElement("div");
    layout.className = "triplet";

    const prompt = document.createElement("p");
    prompt.className = "prompt";
    prompt.textContent = "Which of the bottom two images is more similar to the top image?";

    const query = this.stimulus(q.anchor, "query-card");

    const row = document.createElement("div");
    row.className = "choice-row";
    row.append(
      this.choiceButton(q.left, "choice-left", () => onChoice("left")),
      this.choiceButton(q.right, "choice-right", () => onChoice("right")),
    );

    layout.append(prompt, query, row);
    this.swap(layout);
    // no element receives focus; a keyboard default would bias choices
  }

  showBreak(state: UiSessionState, onContinue: () => void): void {
    this.setProgress(state);
    const screen = document.createElement("div");
    screen.className = "break-screen";
    const text = document.createElement("p");
    text.textContent = "Take a short break. Continue when you are ready.";
    const button = document.createElement("button");
    button.type = "button";
    button.className = "continue";
    button.textContent = "Continue";
    button.addEventListener("click", onContinue, { once: true });
    screen.append(text, button);
    this.swap(screen);
  }

  showDone(state: UiSessionState): void {
    this.setProgress(state);
    const screen = document.createElement("div");
    screen.className = "done-screen";
    screen.textContent = `All done. ${state.answered} of ${state.total} questions answered. Thank you!`;
    this.swap(screen);
  }

  showError(state: UiSessionState, message: string): void {
    this.setProgress(state);
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = message;
    this.swap(banner);
  }

  preload(q: QuestionPayload): void {
    for (const item of [q.anchor, q.left, q.right]) {
      if (IMAGE_LABEL.test(item.label)) {
        const img = new Image();
        img.src = item.label;
      }
    }
  }

  private setProgress(state: UiSessionState): void {
    this.progress.textContent = state.total > 0 ? `${state.answered} / ${state.total}` : "";
  }

  private swap(content: HTMLElement): void {
    this.stage.textContent = "";
    this.stage.append(content);
  }

  private choiceButton(item: ItemRef, side: string, onClick: () => void): HTMLElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = `choice-card ${side}`;
    button.dataset.itemId = String(item.id);
    button.addEventListener("click", onClick);
    button.append(this.stimulusContent(item));
    return button;
  }

  private stimulus(item: ItemRef, className: string): HTMLElement {
    const card = document.createElement("div");
    card.className = className;
    card.dataset.itemId = String(item.id);
    card.append(this.stimulusContent(item));
    return card;
  }

  private stimulusContent(item: ItemRef): HTMLElement {
    if (IMAGE_LABEL.test(item.label)) {
      const img = document.createElement("img");
      img.src = item.label;
      img.alt = "";
      img.width = this.opts.imagePixels;
      img.height = this.opts.imagePixels;
      img.draggable = false;
      img.addEventListener("error", () => this.opts.onAssetError?.(item.label), { once: true });
      return img;
    }
    const text = document.createElement("span");
    text.className = "stimulus-label";
    text.textContent = item.label;
    return text;
  }
}
