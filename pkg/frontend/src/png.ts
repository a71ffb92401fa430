/** Minimal PNG codec.
 *
 * Encoding covers exactly what the sketchpad sends: 8-bit RGB, filter 0 on
 * every row, stored (uncompressed) zlib blocks. Compression would save a few
 * KB at 64x64 and cost byte-for-byte reproducibility across zlib builds.
 *
 * Decoding covers what the service returns: 16-bit grayscale heightmaps and
 * 8-bit RGB textures (plus RGBA for safety), any standard row filter, no
 * interlacing. A canvas decode would clamp heightmaps to 8 bits and lose the
 * meter values behind the min/max elevation labels, so we inflate IDAT with
 * DecompressionStream and unfilter by hand.
 */

export interface DecodedImage {
  width: number;
  height: number;
  bitDepth: 8 | 16;
  colorType: number;
  channels: number;
  /** Row-major, channel-interleaved samples; Uint16Array when bitDepth is 16. */
  samples: Uint8Array | Uint16Array;
}

const SIGNATURE = Uint8Array.of(137, 80, 78, 71, 13, 10, 26, 10);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function concatBytes(parts: Uint8Array[]): Uint8Array {
  let total = 0;
  for (const p of parts) total += p.length;
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, data.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(data, 8);
  view.setUint32(8 + data.length, crc32(out.subarray(4, 8 + data.length)));
  return out;
}

/** zlib stream holding the payload in stored deflate blocks. */
function zlibStored(raw: Uint8Array): Uint8Array {
  const parts: Uint8Array[] = [Uint8Array.of(0x78, 0x01)];
  for (let off = 0; off < raw.length; off += 65535) {
    const block = raw.subarray(off, Math.min(raw.length, off + 65535));
    const head = new Uint8Array(5);
    head[0] = off + 65535 >= raw.length ? 1 : 0;
    head[1] = block.length & 0xff;
    head[2] = (block.length >>> 8) & 0xff;
    head[3] = ~block.length & 0xff;
    head[4] = (~block.length >>> 8) & 0xff;
    parts.push(head, block);
  }
  const trailer = new Uint8Array(4);
  new DataView(trailer.buffer).setUint32(0, adler32(raw));
  parts.push(trailer);
  return concatBytes(parts);
}

/** Encode RGBA pixels as an 8-bit RGB PNG, dropping alpha. Deterministic. */
export function encodeRgbPng(image: {
  width: number;
  height: number;
  rgba: Uint8ClampedArray | Uint8Array;
}): Uint8Array {
  const { width, height, rgba } = image;
  if (width < 1 || height < 1) {
    throw new Error(`cannot encode empty image ${width}x${height}`);
  }
  if (rgba.length !== width * height * 4) {
    throw new Error(`rgba length ${rgba.length} does not match ${width}x${height}`);
  }
  const raw = new Uint8Array(height * (1 + width * 3));
  let at = 0;
  for (let y = 0; y < height; y++) {
    raw[at++] = 0; // filter: none
    for (let x = 0; x < width; x++) {
      const base = (y * width + x) * 4;
      raw[at++] = rgba[base];
      raw[at++] = rgba[base + 1];
      raw[at++] = rgba[base + 2];
    }
  }
  const ihdr = new Uint8Array(13);
  const view = new DataView(ihdr.buffer);
  view.setUint32(0, width);
  view.setUint32(4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // color type: truecolor
  return concatBytes([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const copy = new Uint8Array(data.length); // plain-ArrayBuffer copy keeps Blob typings happy
  copy.set(data);
  const stream = new Blob([copy]).stream().pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function unfilter(raw: Uint8Array, height: number, bpp: number, stride: number): Uint8Array {
  if (raw.length !== height * (stride + 1)) {
    throw new Error(`PNG data is ${raw.length} bytes, expected ${height * (stride + 1)}`);
  }
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const rowIn = raw.subarray(y * (stride + 1) + 1, y * (stride + 1) + 1 + stride);
    const rowOut = out.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    for (let i = 0; i < stride; i++) {
      const a = i >= bpp ? rowOut[i - bpp] : 0;
      const b = prev !== null ? prev[i] : 0;
      const c = i >= bpp && prev !== null ? prev[i - bpp] : 0;
      let v = rowIn[i];
      switch (filter) {
        case 0:
          break;
        case 1:
          v = (v + a) & 0xff;
          break;
        case 2:
          v = (v + b) & 0xff;
          break;
        case 3:
          v = (v + ((a + b) >> 1)) & 0xff;
          break;
        case 4:
          v = (v + paeth(a, b, c)) & 0xff;
          break;
        default:
          throw new Error(`unsupported PNG filter ${filter}`);
      }
      rowOut[i] = v;
    }
  }
  return out;
}

const CHANNELS_FOR_COLOR_TYPE: Record<number, number> = { 0: 1, 2: 3, 6: 4 };

export async function decodePng(bytes: Uint8Array): Promise<DecodedImage> {
  if (bytes.length < 8 || SIGNATURE.some((v, i) => bytes[i] !== v)) {
    throw new Error("not a PNG: bad signature");
  }
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  let sawHeader = false;
  const idat: Uint8Array[] = [];
  let off = 8;
  while (off + 12 <= bytes.length) {
    const view = new DataView(bytes.buffer, bytes.byteOffset + off);
    const length = view.getUint32(0);
    const type = String.fromCharCode(bytes[off + 4], bytes[off + 5], bytes[off + 6], bytes[off + 7]);
    if (off + 12 + length > bytes.length) {
      throw new Error(`truncated PNG: ${type} chunk overruns the buffer`);
    }
    const data = bytes.subarray(off + 8, off + 8 + length);
    if (type === "IHDR") {
      if (length !== 13) throw new Error("malformed IHDR chunk");
      const hv = new DataView(bytes.buffer, bytes.byteOffset + off + 8, 13);
      width = hv.getUint32(0);
      height = hv.getUint32(4);
      bitDepth = data[8];
      colorType = data[9];
      if (data[12] !== 0) throw new Error("interlaced PNGs are not supported");
      sawHeader = true;
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    off += 12 + length;
  }
  if (!sawHeader) throw new Error("truncated PNG: no IHDR chunk");
  if (bitDepth !== 8 && bitDepth !== 16) {
    throw new Error(`unsupported PNG bit depth ${bitDepth}`);
  }
  const channels = CHANNELS_FOR_COLOR_TYPE[colorType];
  if (channels === undefined) {
    throw new Error(`unsupported PNG color type ${colorType}`);
  }
  if (idat.length === 0) throw new Error("truncated PNG: no IDAT chunks");
  const bytesPerSample = bitDepth / 8;
  const bpp = channels * bytesPerSample;
  const stride = width * bpp;
  const raw = unfilter(await inflate(concatBytes(idat)), height, bpp, stride);
  let samples: Uint8Array | Uint16Array;
  if (bitDepth === 8) {
    samples = raw;
  } else {
    samples = new Uint16Array(width * height * channels);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = (raw[2 * i] << 8) | raw[2 * i + 1]; // network byte order
    }
  }
  return { width, height, bitDepth, colorType, channels, samples };
}
