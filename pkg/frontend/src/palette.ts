// Display colors for the 8 tissue labels and derived duct instances.

export const LABEL_NAMES = ['BG', 'BE', 'ME', 'NS', 'DS', 'SC', 'BL', 'NC']

export const LABEL_COLORS: [number, number, number][] = [
  [245, 245, 245], // BG  near-white
  [86, 170, 88], //   BE  green
  [201, 64, 64], //   ME  red
  [240, 200, 210], // NS  light pink
  [186, 130, 160], // DS  mauve
  [235, 215, 120], // SC  pale yellow
  [120, 32, 36], //   BL  dark red
  [105, 105, 105], // NC  gray
]

/** Distinct, stable instance colors (id 1..N wraps around the wheel). */
export function instanceColor(id: number): [number, number, number] {
  const hue = (id * 137.508) % 360 // golden-angle spacing
  return hslToRgb(hue, 0.75, 0.55)
}

function hslToRgb(h: number, s: number, l: number): [number, number, number] {
  const c = (1 - Math.abs(2 * l - 1)) * s
  const hp = h / 60
  const x = c * (1 - Math.abs((hp % 2) - 1))
  let rgb: [number, number, number]
  if (hp < 1) rgb = [c, x, 0]
  else if (hp < 2) rgb = [x, c, 0]
  else if (hp < 3) rgb = [0, c, x]
  else if (hp < 4) rgb = [0, x, c]
  else if (hp < 5) rgb = [x, 0, c]
  else rgb = [c, 0, x]
  const m = l - c / 2
  return [
    Math.round((rgb[0] + m) * 255),
    Math.round((rgb[1] + m) * 255),
    Math.round((rgb[2] + m) * 255),
  ]
}
