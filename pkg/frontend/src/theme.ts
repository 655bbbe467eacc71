/** Color tokens. Only the todo/selected/done state semantics are
 * contractual (white, yellow, green); the exact values are a theme. */

export const STATUS_COLORS = {
  todo: "#ffffff",
  selected: "#ffe066",
  done: "#9bd770",
} as const;

export const BUTTON_COLORS = {
  link: "#d64541", // red: Link (grounded) and Finalize (span)
  linkEntity: "#ffffff", // white: Link Entity (span accumulation)
  noReference: "#9e9e9e", // grey
} as const;

export type MarkableStatus = keyof typeof STATUS_COLORS;
