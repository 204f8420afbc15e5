"""
Скрипт для визуализации результатов пакетного тестирования irrigation.
"""

import os
import json
import matplotlib.pyplot as plt
import numpy as np
import sys


def visualize_test_results(results_file="test_results/test_summary.json"):
    """Визуализирует энергии и время по уровням конструкции."""

    if not os.path.exists(results_file):
        print(f"Ошибка: Файл с результатами не найден: {results_file}")
        return False

    with open(results_file, "r") as f:
        test_results = json.load(f)

    valid_results = [r for r in test_results["results"] if "error" not in r]
    if not valid_results:
        print("Нет валидных результатов для визуализации.")
        return False

    levels = np.array([r["level"] for r in valid_results])
    P = [r["P"] for r in valid_results]
    E = [r["E"] for r in valid_results]
    total = [r["total"] for r in valid_results]
    build_times = [r["build_time"] for r in valid_results]
    energy_times = [r["energy_time"] for r in valid_results]
    cache_speedups = [r["cache_speedup"] for r in valid_results]

    charts_dir = os.path.join(os.path.dirname(results_file), "charts")
    os.makedirs(charts_dir, exist_ok=True)

    # 1. Энергии по уровням
    plt.figure(figsize=(10, 6))
    plt.plot(levels, P, "o-", label="P (периметр)")
    plt.plot(levels, E, "s-", label="E (кинетическая)")
    plt.plot(levels, total, "^-", label="𝓔 (полная)")
    plt.xlabel("Уровень")
    plt.ylabel("Энергия")
    plt.title("Энергия конструкции квадрат → δ₀ по уровням")
    plt.xticks(levels)
    plt.legend()
    plt.tight_layout()
    plt.savefig(os.path.join(charts_dir, "energy_by_level.png"))

    # 2. Время построения и вычисления энергии
    plt.figure(figsize=(10, 6))
    width = 0.35
    plt.bar(levels - width/2, build_times, width, label="Построение")
    plt.bar(levels + width/2, energy_times, width, label="Энергия")
    plt.yscale("log")
    plt.xlabel("Уровень")
    plt.ylabel("Время (сек)")
    plt.title("Время обработки по уровням")
    plt.xticks(levels)
    plt.legend()
    plt.tight_layout()
    plt.savefig(os.path.join(charts_dir, "time_by_level.png"))

    # 3. Ускорение с кэшированием
    plt.figure(figsize=(10, 6))
    plt.bar(levels, cache_speedups, width)
    plt.yscale("log")
    plt.xlabel("Уровень")
    plt.ylabel("Ускорение (раз)")
    plt.title("Ускорение за счет кэширования")
    plt.xticks(levels)
    plt.axhline(y=1.0, color='r', linestyle='--', label='Без ускорения')
    plt.legend()
    plt.tight_layout()
    plt.savefig(os.path.join(charts_dir, "cache_speedup.png"))

    print(f"Графики результатов сохранены в директорию: {charts_dir}")
    return True


if __name__ == "__main__":
    if len(sys.argv) > 1:
        ok = visualize_test_results(sys.argv[1])
    else:
        ok = visualize_test_results()
    sys.exit(0 if ok else 1)
