"""Compare exclusive processor allocation with reservation servers on a set built to defeat it.

Run: python demos/exclusive_allocation.py
"""

from resfed.experiments import exclusive_allocation_experiment


def main():
    result = exclusive_allocation_experiment()
    for key, value in result.summary.items():
        print(f"{key}: {value}")
    print()
    for row in result.rows:
        print(f"{row['task']:>5}  federated={row['federated_processors']:>2} ({row['federated_status']})"
              f"  reservation: {row['reservation_status']}")


if __name__ == "__main__":
    main()
