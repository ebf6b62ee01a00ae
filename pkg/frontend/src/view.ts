// Zoom/pan is pure view state; every stored coordinate is a full-resolution
// raster pixel, so annotations are independent of how they were drawn.

import type { Box } from './types.js'

export interface ViewTransform {
  zoom: number
  panX: number
  panY: number
}

export interface Point {
  x: number
  y: number
}

export function screenToRaster(p: Point, view: ViewTransform): Point {
  return { x: (p.x - view.panX) / view.zoom, y: (p.y - view.panY) / view.zoom }
}

export function rasterToScreen(p: Point, view: ViewTransform): Point {
  return { x: p.x * view.zoom + view.panX, y: p.y * view.zoom + view.panY }
}

/** Integer pixel box covering the dragged raster region; null when empty. */
export function boxFromDrag(a: Point, b: Point, view: ViewTransform): Box | null {
  const ra = screenToRaster(a, view)
  const rb = screenToRaster(b, view)
  const x0 = Math.floor(Math.min(ra.x, rb.x))
  const y0 = Math.floor(Math.min(ra.y, rb.y))
  const x1 = Math.ceil(Math.max(ra.x, rb.x))
  const y1 = Math.ceil(Math.max(ra.y, rb.y))
  if (x1 - x0 < 1 || y1 - y0 < 1) return null
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
}

/** Zoom about a screen point so the raster pixel under the cursor stays put. */
export function zoomAround(view: ViewTransform, screen: Point, factor: number,
                           minZoom = 0.25, maxZoom = 16): ViewTransform {
  const zoom = Math.min(maxZoom, Math.max(minZoom, view.zoom * factor))
  const anchor = screenToRaster(screen, view)
  return {
    zoom,
    panX: screen.x - anchor.x * zoom,
    panY: screen.y - anchor.y * zoom,
  }
}

export function clampBoxToRaster(box: Box, width: number, height: number): Box | null {
  const x0 = Math.max(box.x, 0)
  const y0 = Math.max(box.y, 0)
  const x1 = Math.min(box.x + box.w, width)
  const y1 = Math.min(box.y + box.h, height)
  if (x1 - x0 < 1 || y1 - y0 < 1) return null
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
}

export type Handle = 'nw' | 'ne' | 'sw' | 'se'

export const HANDLES: Handle[] = ['nw', 'ne', 'sw', 'se']

export function handlePosition(box: Box, handle: Handle): Point {
  const x = handle === 'nw' || handle === 'sw' ? box.x : box.x + box.w
  const y = handle === 'nw' || handle === 'ne' ? box.y : box.y + box.h
  return { x, y }
}

/** Move one corner to a raster point; may collapse below 1x1 (caller decides). */
export function resizeByHandle(box: Box, handle: Handle, to: Point): Box {
  let x0 = box.x
  let y0 = box.y
  let x1 = box.x + box.w
  let y1 = box.y + box.h
  const px = Math.round(to.x)
  const py = Math.round(to.y)
  if (handle === 'nw' || handle === 'sw') x0 = px
  else x1 = px
  if (handle === 'nw' || handle === 'ne') y0 = py
  else y1 = py
  return { x: Math.min(x0, x1), y: Math.min(y0, y1), w: Math.abs(x1 - x0), h: Math.abs(y1 - y0) }
}
