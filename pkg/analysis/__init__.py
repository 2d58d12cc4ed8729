"""
analysis 패키지

- goodlambda_lab : good-λ / good-τ / 노름 비교 / 지수 적분성 검증
- sharpness      : 지수 감쇠가 최적임을 보이는 명시적 측도 구성
- battery        : 시드 고정 무작위 측도 묶음에 대한 상수 적합 / 보류 검증
- reports        : JSON / CSV 보고서 작성
"""
