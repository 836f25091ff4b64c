const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK_64 = 0xffffffffffffffffn;

/** FNV-1a over the UTF-8 bytes; stable across platforms and runs. */
export function fnv1a64(text: string): bigint {
  let hash = FNV_OFFSET;
  const bytes = Buffer.from(text, "utf8");
  for (const byte of bytes) {
    hash ^= BigInt(byte);
    hash = (hash * FNV_PRIME) & MASK_64;
  }
  return hash;
}

export function fnv1a64Hex(text: string): string {
  return fnv1a64(text).toString(16).padStart(16, "0");
}
