"""
lattice 패키지

- dyadic_core : 유한 이진(dyadic) 격자, 측도 트리, 셀 집합
- potentials  : 비선형 포텐셜 𝒯 / F 와 분수 극대 함수
- weights     : 가중치 σ 와 weak A∞ 검사
- whitney     : 레벨 집합의 극대 dyadic / Whitney 분해
- rng         : 재현 가능한 분할형 난수 생성기
"""
