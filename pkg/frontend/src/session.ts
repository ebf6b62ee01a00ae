// The annotation session model: box list, selection, dirty flag, undo stack.
// Pure data logic, no DOM; the canvas layer renders whatever lives here.

import type { Box, BoxDocument } from './types.js'

function normalized(box: Box): Box {
  return {
    x: Math.round(box.x),
    y: Math.round(box.y),
    w: Math.round(box.w),
    h: Math.round(box.h),
  }
}

export class AnnotationSession {
  readonly roiId: string
  readonly rasterWidth: number
  readonly rasterHeight: number
  private boxList: Box[]
  private undoStack: Box[][] = []
  selected: number | null = null
  dirty = false

  constructor(roiId: string, rasterWidth: number, rasterHeight: number, boxes: Box[] = []) {
    this.roiId = roiId
    this.rasterWidth = rasterWidth
    this.rasterHeight = rasterHeight
    this.boxList = boxes.map(normalized)
  }

  get boxes(): readonly Box[] {
    return this.boxList
  }

  private pushUndo(): void {
    this.undoStack.push(this.boxList.map((b) => ({ ...b })))
  }

  /** Add a drawn box; zero-area boxes are discarded silently. */
  addBox(box: Box): boolean {
    const b = normalized(box)
    if (b.w < 1 || b.h < 1) return false
    this.pushUndo()
    this.boxList.push(b)
    this.selected = this.boxList.length - 1
    this.dirty = true
    return true
  }

  /** Replace a box (move/resize); dropping below 1x1 removes it. */
  updateBox(index: number, box: Box): void {
    if (index < 0 || index >= this.boxList.length) return
    this.pushUndo()
    const b = normalized(box)
    if (b.w < 1 || b.h < 1) {
      this.boxList.splice(index, 1)
      this.selected = null
    } else {
      this.boxList[index] = b
    }
    this.dirty = true
  }

  deleteSelected(): boolean {
    if (this.selected === null) return false
    this.pushUndo()
    this.boxList.splice(this.selected, 1)
    this.selected = null
    this.dirty = true
    return true
  }

  undo(): boolean {
    const prev = this.undoStack.pop()
    if (!prev) return false
    this.boxList = prev
    this.selected = null
    this.dirty = true
    return true
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0
  }

  boxAt(p: { x: number; y: number }): number | null {
    for (let i = this.boxList.length - 1; i >= 0; i--) {
      const b = this.boxList[i]
      if (p.x >= b.x && p.x < b.x + b.w && p.y >= b.y && p.y < b.y + b.h) return i
    }
    return null
  }

  toDocument(): BoxDocument {
    return {
      image: this.roiId,
      boxes: this.boxList.map((b) => ({ ...b })),
    }
  }

  static fromDocument(doc: BoxDocument, rasterWidth: number, rasterHeight: number): AnnotationSession {
    return new AnnotationSession(doc.image, rasterWidth, rasterHeight, doc.boxes)
  }

  markSaved(): void {
    this.dirty = false
  }
}
