// Canvas rendering of the raster layers, boxes, and instance previews.

import { instanceColor, LABEL_COLORS } from './palette.js'
import type { AnnotationSession } from './session.js'
import type { DeriveResponse, MaskResponse } from './types.js'
import { HANDLES, handlePosition, rasterToScreen, type ViewTransform } from './view.js'

/** Offscreen canvas holding a preview-resolution grid as image pixels. */
export function gridToCanvas(
  width: number,
  height: number,
  rgba: (index: number) => [number, number, number, number],
): HTMLCanvasElement {
  const canvas = document.createElement('canvas')
  canvas.width = width
  canvas.height = height
  const ctx = canvas.getContext('2d')!
  const image = ctx.createImageData(width, height)
  for (let i = 0; i < width * height; i++) {
    const [r, g, b, a] = rgba(i)
    image.data[i * 4] = r
    image.data[i * 4 + 1] = g
    image.data[i * 4 + 2] = b
    image.data[i * 4 + 3] = a
  }
  ctx.putImageData(image, 0, 0)
  return canvas
}

export function labelLayer(mask: MaskResponse): HTMLCanvasElement {
  return gridToCanvas(mask.preview_width, mask.preview_height, (i) => {
    const [r, g, b] = LABEL_COLORS[mask.labels[i]] ?? [255, 0, 255]
    return [r, g, b, 255]
  })
}

export function maskOverlayLayer(mask: MaskResponse): HTMLCanvasElement {
  return gridToCanvas(mask.preview_width, mask.preview_height, (i) =>
    mask.bits[i] ? [255, 255, 255, 255] : [30, 30, 30, 160],
  )
}

export function instanceLayer(preview: DeriveResponse['preview']): HTMLCanvasElement {
  return gridToCanvas(preview.width, preview.height, (i) => {
    const id = preview.ids[i]
    if (!id) return [0, 0, 0, 0]
    const [r, g, b] = instanceColor(id)
    return [r, g, b, 185]
  })
}

export interface SceneLayers {
  label: HTMLCanvasElement | null
  maskOverlay: HTMLCanvasElement | null
  instances: HTMLCanvasElement | null
}

export interface SceneOptions {
  rasterWidth: number
  rasterHeight: number
  showMask: boolean
  maskOpacity: number
  showInstances: boolean
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  layers: SceneLayers,
  session: AnnotationSession | null,
  view: ViewTransform,
  options: SceneOptions,
): void {
  ctx.save()
  ctx.fillStyle = '#202328'
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height)
  ctx.imageSmoothingEnabled = false
  ctx.translate(view.panX, view.panY)
  ctx.scale(view.zoom, view.zoom)

  const w = options.rasterWidth
  const h = options.rasterHeight
  if (layers.label) ctx.drawImage(layers.label, 0, 0, w, h)
  if (layers.maskOverlay && options.showMask) {
    ctx.globalAlpha = options.maskOpacity
    ctx.drawImage(layers.maskOverlay, 0, 0, w, h)
    ctx.globalAlpha = 1
  }
  if (layers.instances && options.showInstances) {
    ctx.drawImage(layers.instances, 0, 0, w, h)
  }
  ctx.restore()

  if (!session) return
  session.boxes.forEach((box, i) => {
    const tl = rasterToScreen({ x: box.x, y: box.y }, view)
    const sw = box.w * view.zoom
    const sh = box.h * view.zoom
    const selected = i === session.selected
    ctx.lineWidth = selected ? 2.5 : 1.5
    ctx.strokeStyle = selected ? '#ffd54a' : '#4ac1ff'
    ctx.strokeRect(tl.x, tl.y, sw, sh)
    if (selected) {
      ctx.fillStyle = '#ffd54a'
      for (const handle of HANDLES) {
        const p = rasterToScreen(handlePosition(box, handle), view)
        ctx.fillRect(p.x - 4, p.y - 4, 8, 8)
      }
    }
  })
}
