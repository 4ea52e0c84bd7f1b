from __future__ import annotations

from services.theory_service import alternate_optimize, optimal_detector, random_world


def main():
    for shifted in (False, True):
        world = random_world(4, 8, seed=3, shifted=shifted)
        print(f"=== tabular world 4x8 shifted={shifted} ===")
        traj = alternate_optimize(world, outer_steps=400, inner_steps=5, seed=3)
        for s in traj.steps[::50] + traj.steps[-1:]:
            print(f"step={s.step:4d} avg_tv={s.avg_tv:.3e} max_f_dev={s.max_f_dev:.3e} G={s.generator_objective:.6f}")
        # after convergence the detector should sit near 0.5
        f = optimal_detector(world, traj.policy)
        print("F* row 0:", [round(float(v), 4) for v in f.values[0]])


if __name__ == "__main__":
    main()
