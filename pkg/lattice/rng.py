"""
lattice/rng.py

시드 고정 난수 생성기.

xorshift64* 본체 + splitmix64 시드 확장.
다른 언어로 포팅해도 같은 시드에서 같은 수열이 나오도록
모든 연산을 64비트 정수 마스크로 명시한다.

    x ^= x >> 12
    x ^= x << 25   (mod 2^64)
    x ^= x >> 27
    out = x * 0x2545F4914F6CDD1D  (mod 2^64)

random()      = (out >> 11) * 2^-53
randbelow(m)  = out % m   (m 이 2 의 거듭제곱이 아니면 작은 나머지 쪽으로
                           최대 m/2^64 만큼 치우침. 포팅 간 수열 일치를 위해 그대로 둔다)
split(key)    = splitmix64(seed ^ splitmix64(key)) 로 만든 독립 스트림
"""

MASK64 = (1 << 64) - 1
XORSHIFT_MULT = 0x2545F4914F6CDD1D
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Xorshift64Star:
    """
    xorshift64* 생성기.

    같은 (seed, key) 조합이면 스레드 수나 호출 순서와 무관하게
    같은 수열을 만든다 (split 으로 표본마다 스트림을 나눠 쓰는 방식).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        state = splitmix64(self.seed)
        # 상태 0 은 고정점이라 피한다
        self._state = state if state != 0 else GOLDEN_GAMMA

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * XORSHIFT_MULT) & MASK64

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, m: int) -> int:
        if m <= 0:
            raise ValueError(f"randbelow: m must be positive (m={m})")
        return self.next_u64() % m

    def split(self, key: int) -> "Xorshift64Star":
        return Xorshift64Star(splitmix64(self.seed ^ splitmix64(int(key) & MASK64)))
