/**
 * Pan and zoom arithmetic for published SVG diagrams.
 *
 * The transform is applied to the inner viewport group, never to the nodes
 * themselves, so the hotlinks each node carries keep working at any zoom.
 * Published SVGs are authored at fit scale, which makes the identity
 * transform the "fit" view a double activation returns to.
 */

export interface ViewTransform {
  scale: number;
  x: number;
  y: number;
}

export const MIN_SCALE = 0.2;
export const MAX_SCALE = 8;

/** The fitted view every diagram starts from. */
export function identity(): ViewTransform {
  return { scale: 1, x: 0, y: 0 };
}

/** SVG transform attribute value for one state. */
export function toAttribute(t: ViewTransform): string {
  return `translate(${t.x} ${t.y}) scale(${t.scale})`;
}

/**
 * Scale about a fixed point, so the content under the cursor stays under
 * the cursor. The resulting scale is clamped to [MIN_SCALE, MAX_SCALE].
 */
export function zoomAt(
  t: ViewTransform,
  factor: number,
  px: number,
  py: number,
): ViewTransform {
  const scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, t.scale * factor));
  const ratio = scale / t.scale;
  return {
    scale,
    x: px - (px - t.x) * ratio,
    y: py - (py - t.y) * ratio,
  };
}

/** Translate by a screen-space delta. */
export function panBy(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { scale: t.scale, x: t.x + dx, y: t.y + dy };
}

function clampAxis(offset: number, content: number, view: number): number {
  // Pannable range covers every part of the content, extended by one
  // viewport of overshoot on each side.
  const lo = Math.min(0, view - content) - view;
  const hi = Math.max(0, view - content) + view;
  return Math.min(hi, Math.max(lo, offset));
}

/**
 * Keep the content within a margin of one viewport of the visible area,
 * whatever the current scale, so a runaway drag can always be recovered.
 */
export function clampPan(
  t: ViewTransform,
  contentWidth: number,
  contentHeight: number,
  viewWidth: number,
  viewHeight: number,
): ViewTransform {
  return {
    scale: t.scale,
    x: clampAxis(t.x, contentWidth * t.scale, viewWidth),
    y: clampAxis(t.y, contentHeight * t.scale, viewHeight),
  };
}
