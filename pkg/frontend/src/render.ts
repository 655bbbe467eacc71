/** DOM view: full re-render from the session after every state change.
 *
 * Layout follows the task descriptions: document text on the right with
 * markable pronouns highlighted, the entity sidebar (grounded task only)
 * on the left with the add-entity input at its bottom, action buttons
 * and the countdown above the text.
 */

import { AnnotationSession } from "./state.js";
import { BUTTON_COLORS, STATUS_COLORS } from "./theme.js";
import type { SpanTriple } from "./types.js";

export interface ViewHandlers {
  onSelectMarkable: (markableId: string) => void;
  onToggleEntity: (entityId: string) => void;
  onLink: () => void;
  onLinkEntity: () => void;
  onFinalize: () => void;
  onNoReference: () => void;
  onAddEntity: (name: string) => void;
  onSubmit: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderSection(
  doc: Document,
  session: AnnotationSession,
  sectionIndex: number,
  handlers: ViewHandlers,
): HTMLElement {
  const section = session.document.sections[sectionIndex];
  const paragraph = el(doc, "p", { "data-section": String(section.index), class: "section" });
  const marks = session.document.markables
    .filter((m) => m.section_index === section.index)
    .sort((a, b) => a.span[0] - b.span[0]);
  let cursor = 0;
  for (const markable of marks) {
    const [start, end] = markable.span;
    if (start > cursor) {
      paragraph.appendChild(doc.createTextNode(section.text.slice(cursor, start)));
    }
    const status = session.statusOf(markable.id);
    const span = el(doc, "span", {
      class: `markable markable-${status}`,
      "data-markable": markable.id,
      style: `background-color: ${STATUS_COLORS[status]}; cursor: pointer;`,
    }, section.text.slice(start, end));
    span.addEventListener("click", () => handlers.onSelectMarkable(markable.id));
    paragraph.appendChild(span);
    cursor = end;
  }
  paragraph.appendChild(doc.createTextNode(section.text.slice(cursor)));
  return paragraph;
}

function renderSidebar(doc: Document, session: AnnotationSession, handlers: ViewHandlers): HTMLElement {
  const sidebar = el(doc, "aside", { id: "entity-sidebar" });
  sidebar.appendChild(el(doc, "h2", {}, "Entities"));
  for (const entity of session.entities()) {
    const selected = session.isEntitySelected(entity.id);
    const button = el(doc, "button", {
      class: "entity" + (selected ? " entity-selected" : ""),
      "data-entity": entity.id,
      style: `background-color: ${selected ? STATUS_COLORS.selected : STATUS_COLORS.todo};`,
    }, entity.canonical_name);
    button.addEventListener("click", () => handlers.onToggleEntity(entity.id));
    sidebar.appendChild(button);
  }
  const addBox = el(doc, "div", { id: "add-entity" });
  const input = el(doc, "input", {
    id: "add-entity-input",
    type: "text",
    placeholder: "Missing entity name",
  });
  const addButton = el(doc, "button", { id: "add-entity-button" }, "Add entity");
  addButton.addEventListener("click", () => handlers.onAddEntity(input.value));
  addBox.appendChild(input);
  addBox.appendChild(addButton);
  sidebar.appendChild(addBox);
  return sidebar;
}

function renderControls(doc: Document, session: AnnotationSession, handlers: ViewHandlers): HTMLElement {
  const bar = el(doc, "div", { id: "controls" });
  if (session.protocol === "grounded") {
    const link = el(doc, "button", {
      id: "link-button",
      style: `background-color: ${BUTTON_COLORS.link};`,
    }, "Link");
    link.addEventListener("click", handlers.onLink);
    bar.appendChild(link);
  } else {
    const accumulate = el(doc, "button", {
      id: "link-entity-button",
      style: `background-color: ${BUTTON_COLORS.linkEntity};`,
    }, "Link Entity");
    accumulate.addEventListener("click", handlers.onLinkEntity);
    bar.appendChild(accumulate);
    const finalize = el(doc, "button", {
      id: "finalize-button",
      style: `background-color: ${BUTTON_COLORS.link};`,
    }, "Finalize");
    finalize.addEventListener("click", handlers.onFinalize);
    bar.appendChild(finalize);
    const pending = el(doc, "span", { id: "pending-spans" },
      session.pendingSpanCount() ? `${session.pendingSpanCount()} span(s) pending` : "");
    bar.appendChild(pending);
  }
  const noRef = el(doc, "button", {
    id: "no-reference-button",
    style: `background-color: ${BUTTON_COLORS.noReference};`,
  }, "No reference");
  noRef.addEventListener("click", handlers.onNoReference);
  bar.appendChild(noRef);

  const submit = el(doc, "button", { id: "submit-button" }, "Submit");
  if (!session.submitEnabled()) submit.setAttribute("disabled", "disabled");
  submit.addEventListener("click", handlers.onSubmit);
  bar.appendChild(submit);
  return bar;
}

export function render(root: HTMLElement, session: AnnotationSession, handlers: ViewHandlers): void {
  const doc = root.ownerDocument;
  root.replaceChildren();

  const header = el(doc, "header");
  header.appendChild(el(doc, "h1", {}, session.document.title));
  header.appendChild(el(doc, "span", { id: "countdown" },
    `${Math.floor(session.remainingSeconds())} s left`));
  root.appendChild(header);

  root.appendChild(renderControls(doc, session, handlers));
  root.appendChild(el(doc, "div", { id: "warning", role: "alert" }, session.warning() ?? ""));

  const main = el(doc, "div", { id: "layout", style: "display: flex; gap: 1rem;" });
  if (session.protocol === "grounded") {
    main.appendChild(renderSidebar(doc, session, handlers));
  }
  const textPane = el(doc, "div", { id: "document-text" });
  for (const section of session.document.sections) {
    textPane.appendChild(renderSection(doc, session, section.index, handlers));
  }
  main.appendChild(textPane);
  root.appendChild(main);
}

/** Map the window selection to (section, char_start, char_end) offsets
 * inside one rendered section paragraph, or null when there is no usable
 * selection. Offsets count characters of the section text regardless of
 * how it is split across markable spans and text nodes. */
export function getSelectionSpan(win: Window): SpanTriple | null {
  const selection = win.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return null;
  const range = selection.getRangeAt(0);

  const sectionOf = (node: Node): HTMLElement | null => {
    for (let cur: Node | null = node; cur; cur = cur.parentNode) {
      if (cur.nodeType === 1) {
        const element = cur as HTMLElement;
        if (element.dataset.section !== undefined) return element;
      }
    }
    return null;
  };
  const start = sectionOf(range.startContainer);
  const end = sectionOf(range.endContainer);
  if (!start || start !== end) return null;

  const offsetWithin = (container: Node, offset: number): number => {
    let total = 0;
    const walker = start.ownerDocument.createTreeWalker(start, 4 /* NodeFilter.SHOW_TEXT */);
    for (let node = walker.nextNode(); node; node = walker.nextNode()) {
      if (node === container) return total + offset;
      total += (node.textContent ?? "").length;
    }
    // container is an element: count characters of its preceding siblings
    return total;
  };
  const from = offsetWithin(range.startContainer, range.startOffset);
  const to = offsetWithin(range.endContainer, range.endOffset);
  if (from >= to) return null;
  return [Number(start.dataset.section), from, to];
}
