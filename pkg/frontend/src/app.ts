// Interactive wiring: DOM events, gesture handling, service calls.

import { ApiClient, ApiError } from './api.js'
import { drawScene, instanceLayer, labelLayer, maskOverlayLayer, type SceneLayers } from './render.js'
import { AnnotationSession } from './session.js'
import type { Box } from './types.js'
import {
  boxFromDrag,
  clampBoxToRaster,
  HANDLES,
  handlePosition,
  rasterToScreen,
  resizeByHandle,
  screenToRaster,
  zoomAround,
  type Handle,
  type Point,
  type ViewTransform,
} from './view.js'

const HANDLE_HIT_PX = 6
const PREVIEW_DEBOUNCE_MS = 300

type Gesture =
  | { kind: 'none' }
  | { kind: 'draw'; start: Point; current: Point }
  | { kind: 'move'; index: number; grabOffset: Point; current: Box }
  | { kind: 'resize'; index: number; handle: Handle; current: Box }
  | { kind: 'pan'; start: Point; panX: number; panY: number }

export class App {
  private readonly api: ApiClient
  private readonly canvas: HTMLCanvasElement
  private readonly ctx: CanvasRenderingContext2D
  private session: AnnotationSession | null = null
  private layers: SceneLayers = { label: null, maskOverlay: null, instances: null }
  private view: ViewTransform = { zoom: 1, panX: 0, panY: 0 }
  private gesture: Gesture = { kind: 'none' }
  private rasterW = 0
  private rasterH = 0
  private previewAbort: AbortController | null = null
  private previewTimer: number | null = null
  private spaceDown = false

  constructor(api: ApiClient) {
    this.api = api
    this.canvas = document.getElementById('canvas') as HTMLCanvasElement
    this.ctx = this.canvas.getContext('2d')!
    this.bindUi()
  }

  // ------------------------------------------------------------ bootstrap

  async start(): Promise<void> {
    try {
      await this.api.health()
      const rois = await this.api.listRois()
      const select = this.el<HTMLSelectElement>('roi-select')
      select.innerHTML = ''
      for (const id of rois) {
        const opt = document.createElement('option')
        opt.value = id
        opt.textContent = id
        select.appendChild(opt)
      }
      this.hideBanner()
      if (rois.length) await this.loadRoi(rois[0])
    } catch (err) {
      this.showBanner(`Service unreachable: ${describe(err)}`)
    }
  }

  async loadRoi(roi: string): Promise<void> {
    try {
      const mask = await this.api.getMask(roi)
      const doc = await this.api.getBoxes(roi)
      this.rasterW = mask.width
      this.rasterH = mask.height
      this.session = AnnotationSession.fromDocument(doc, mask.width, mask.height)
      this.layers = {
        label: labelLayer(mask),
        maskOverlay: maskOverlayLayer(mask),
        instances: null,
      }
      this.fitView()
      this.hideBanner()
      this.setStatus(`loaded ${roi} (${doc.boxes.length} boxes)`)
      this.schedulePreview()
      this.redraw()
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.toast(`ROI not found: ${roi}`)
      } else {
        this.showBanner(`Failed to load ${roi}: ${describe(err)}`)
      }
    }
  }

  // ------------------------------------------------------------ preview

  /** One in-flight preview at most; newer requests cancel pending ones. */
  schedulePreview(): void {
    if (this.previewTimer !== null) window.clearTimeout(this.previewTimer)
    this.previewTimer = window.setTimeout(() => void this.previewNow(), PREVIEW_DEBOUNCE_MS)
  }

  async previewNow(): Promise<void> {
    if (!this.session) return
    this.previewAbort?.abort()
    const abort = new AbortController()
    this.previewAbort = abort
    try {
      const result = await this.api.derive(this.session.roiId, this.session.boxes, abort.signal)
      if (abort.signal.aborted) return
      this.layers.instances = instanceLayer(result.preview)
      this.el<HTMLElement>('lbl-count').textContent = String(result.count)
      this.redraw()
    } catch (err) {
      if ((err as Error).name === 'AbortError') return
      this.toast(`Preview failed: ${describe(err)}`) // previous preview retained
    }
  }

  async save(): Promise<void> {
    if (!this.session) return
    try {
      const doc = this.session.toDocument()
      await this.api.saveBoxes(this.session.roiId, doc)
      this.session.markSaved()
      this.setStatus(`saved ${doc.boxes.length} boxes`)
    } catch (err) {
      this.toast(`Save failed: ${describe(err)}`)
    }
  }

  // ------------------------------------------------------------ events

  private bindUi(): void {
    this.el<HTMLButtonElement>('btn-load').addEventListener('click', () => {
      const roi = this.el<HTMLSelectElement>('roi-select').value
      if (roi) void this.loadRoi(roi)
    })
    this.el<HTMLButtonElement>('btn-save').addEventListener('click', () => void this.save())
    this.el<HTMLButtonElement>('btn-preview').addEventListener('click', () => void this.previewNow())
    this.el<HTMLButtonElement>('btn-undo').addEventListener('click', () => this.undo())
    this.el<HTMLButtonElement>('btn-retry').addEventListener('click', () => void this.start())
    this.el<HTMLInputElement>('chk-mask').addEventListener('change', () => this.redraw())
    this.el<HTMLInputElement>('rng-opacity').addEventListener('input', () => this.redraw())

    window.addEventListener('keydown', (ev) => {
      if (ev.key === ' ') this.spaceDown = true
      if ((ev.key === 'Delete' || ev.key === 'Backspace') && this.session?.deleteSelected()) {
        ev.preventDefault()
        this.afterMutation()
      }
      if (ev.key === 'z' && (ev.ctrlKey || ev.metaKey)) {
        ev.preventDefault()
        this.undo()
      }
    })
    window.addEventListener('keyup', (ev) => {
      if (ev.key === ' ') this.spaceDown = false
    })

    this.canvas.addEventListener('mousedown', (ev) => this.onMouseDown(this.local(ev), ev))
    this.canvas.addEventListener('mousemove', (ev) => this.onMouseMove(this.local(ev)))
    window.addEventListener('mouseup', () => this.onMouseUp())
    this.canvas.addEventListener('wheel', (ev) => {
      ev.preventDefault()
      const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2
      this.view = zoomAround(this.view, this.local(ev), factor)
      this.redraw()
    })
  }

  private undo(): void {
    if (this.session?.undo()) this.afterMutation()
  }

  private afterMutation(): void {
    this.schedulePreview()
    this.redraw()
  }

  private onMouseDown(p: Point, ev: MouseEvent): void {
    if (!this.session) return
    if (ev.button === 1 || this.spaceDown) {
      this.gesture = { kind: 'pan', start: p, panX: this.view.panX, panY: this.view.panY }
      return
    }
    const raster = screenToRaster(p, this.view)
    if (this.session.selected !== null) {
      const box = this.session.boxes[this.session.selected]
      for (const handle of HANDLES) {
        const hp = rasterToScreen(handlePosition(box, handle), this.view)
        if (Math.abs(hp.x - p.x) <= HANDLE_HIT_PX && Math.abs(hp.y - p.y) <= HANDLE_HIT_PX) {
          this.gesture = { kind: 'resize', index: this.session.selected, handle, current: box }
          return
        }
      }
    }
    const hit = this.session.boxAt(raster)
    if (hit !== null) {
      this.session.selected = hit
      const box = this.session.boxes[hit]
      this.gesture = {
        kind: 'move',
        index: hit,
        grabOffset: { x: raster.x - box.x, y: raster.y - box.y },
        current: box,
      }
      this.redraw()
      return
    }
    this.session.selected = null
    this.gesture = { kind: 'draw', start: p, current: p }
    this.redraw()
  }

  private onMouseMove(p: Point): void {
    if (!this.session) return
    switch (this.gesture.kind) {
      case 'pan': {
        this.view = {
          zoom: this.view.zoom,
          panX: this.gesture.panX + (p.x - this.gesture.start.x),
          panY: this.gesture.panY + (p.y - this.gesture.start.y),
        }
        this.redraw()
        return
      }
      case 'draw': {
        this.gesture.current = p
        this.redraw()
        this.drawRubberBand(this.gesture.start, p)
        return
      }
      case 'move': {
        const raster = screenToRaster(p, this.view)
        const box = this.session.boxes[this.gesture.index]
        this.gesture.current = {
          x: Math.round(raster.x - this.gesture.grabOffset.x),
          y: Math.round(raster.y - this.gesture.grabOffset.y),
          w: box.w,
          h: box.h,
        }
        this.redraw(this.gesture.index, this.gesture.current)
        return
      }
      case 'resize': {
        const raster = screenToRaster(p, this.view)
        const orig = this.session.boxes[this.gesture.index]
        this.gesture.current = resizeByHandle(orig, this.gesture.handle, raster)
        this.redraw(this.gesture.index, this.gesture.current)
        return
      }
    }
  }

  private onMouseUp(): void {
    if (!this.session) {
      this.gesture = { kind: 'none' }
      return
    }
    const g = this.gesture
    this.gesture = { kind: 'none' }
    switch (g.kind) {
      case 'draw': {
        const box = boxFromDrag(g.start, g.current, this.view)
        const clamped = box && clampBoxToRaster(box, this.rasterW, this.rasterH)
        if (clamped && this.session.addBox(clamped)) this.afterMutation()
        else this.redraw()
        return
      }
      case 'move':
      case 'resize': {
        const clamped = clampBoxToRaster(g.current, this.rasterW, this.rasterH)
        this.session.updateBox(g.index, clamped ?? { x: 0, y: 0, w: 0, h: 0 })
        this.afterMutation()
        return
      }
      default:
        return
    }
  }

  // ------------------------------------------------------------ drawing

  private fitView(): void {
    const scale = Math.min(
      this.canvas.width / this.rasterW,
      this.canvas.height / this.rasterH,
    )
    this.view = {
      zoom: scale,
      panX: (this.canvas.width - this.rasterW * scale) / 2,
      panY: (this.canvas.height - this.rasterH * scale) / 2,
    }
  }

  private redraw(ghostIndex: number | null = null, ghostBox: Box | null = null): void {
    if (!this.session) return
    const boxesBackup = ghostIndex !== null && ghostBox ? this.session.boxes[ghostIndex] : null
    if (ghostIndex !== null && ghostBox) {
      // transient gesture preview; the session is only mutated on mouseup
      ;(this.session.boxes as Box[])[ghostIndex] = ghostBox
    }
    drawScene(this.ctx, this.layers, this.session, this.view, {
      rasterWidth: this.rasterW,
      rasterHeight: this.rasterH,
      showMask: this.el<HTMLInputElement>('chk-mask').checked,
      maskOpacity: Number(this.el<HTMLInputElement>('rng-opacity').value) / 100,
      showInstances: true,
    })
    if (ghostIndex !== null && boxesBackup) {
      ;(this.session.boxes as Box[])[ghostIndex] = boxesBackup
    }
    this.el<HTMLElement>('lbl-dirty').textContent = this.session.dirty ? 'unsaved changes' : ''
  }

  private drawRubberBand(a: Point, b: Point): void {
    this.ctx.save()
    this.ctx.strokeStyle = '#8df'
    this.ctx.setLineDash([5, 4])
    this.ctx.strokeRect(Math.min(a.x, b.x), Math.min(a.y, b.y), Math.abs(b.x - a.x), Math.abs(b.y - a.y))
    this.ctx.restore()
  }

  // ------------------------------------------------------------ chrome

  private local(ev: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect()
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top }
  }

  private el<T extends HTMLElement>(id: string): T {
    return document.getElementById(id) as T
  }

  private showBanner(message: string): void {
    this.el<HTMLElement>('banner-msg').textContent = message
    this.el<HTMLElement>('banner').style.display = 'flex'
  }

  private hideBanner(): void {
    this.el<HTMLElement>('banner').style.display = 'none'
  }

  private toast(message: string): void {
    const toast = this.el<HTMLElement>('toast')
    toast.textContent = message
    toast.style.display = 'block'
    window.setTimeout(() => {
      toast.style.display = 'none'
    }, 4000)
  }

  private setStatus(message: string): void {
    this.el<HTMLElement>('status').textContent = message
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err)
}
