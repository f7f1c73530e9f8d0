/** Small least-recently-used cache.  A Map iterates in insertion order, so
 *  re-inserting on access keeps the eviction candidate at the front. */
export class LruCache<K, V> {
  private items = new Map<K, V>();

  constructor(
    readonly capacity: number,
    private readonly onEvict?: (value: V, key: K) => void,
  ) {
    if (!Number.isInteger(capacity) || capacity < 1) {
      throw new RangeError(`capacity must be a positive integer, got ${capacity}`);
    }
  }

  get size(): number {
    return this.items.size;
  }

  has(key: K): boolean {
    return this.items.has(key);
  }

  get(key: K): V | undefined {
    if (!this.items.has(key)) return undefined;
    const value = this.items.get(key) as V;
    this.items.delete(key);
    this.items.set(key, value);
    return value;
  }

  set(key: K, value: V): void {
    if (this.items.has(key)) this.items.delete(key);
    this.items.set(key, value);
    while (this.items.size > this.capacity) {
      const [oldestKey, oldestValue] = this.items.entries().next().value as [K, V];
      this.items.delete(oldestKey);
      this.onEvict?.(oldestValue, oldestKey);
    }
  }

  clear(): void {
    if (this.onEvict) {
      for (const [key, value] of this.items) this.onEvict(value, key);
    }
    this.items.clear();
  }
}
