"""
Tuning a temperature for a triage team
======================================

Casualties are classified into four injury states and a human picks one of
three actions. The human is modeled as a noisy cost minimizer who partly trusts
the AI's scalar confidence. We compare the NLL-fitted temperature with one
chosen to minimize the team's expected cost directly.
"""

from decision_sea import expected_cost
from decision_sea.scenarios import (
    ExperimentConfig,
    build_policy,
    simulate_splits,
    temperature_output_for,
    triage_scenario,
    tune_temperature_for_decisions,
)
from decision_sea.sea import TemperatureModel, fit_temperature_nll

sc = triage_scenario()
print(sc.cost.costs)

cfg = ExperimentConfig("triage", methods=("decision_temperature",), policies=("modeled_human",))
cal, test = simulate_splits(cfg, seed=11)
human = build_policy("modeled_human", sc)

nll = fit_temperature_nll(cal)
tuned = tune_temperature_for_decisions(sc, human, cal)
print(f"NLL temperature      {nll.T:.3f}")
print(f"decision temperature {tuned.params['T']:.3f}")

for label, T in (("T=1", 1.0), ("NLL", nll.T), ("decision", tuned.params["T"])):
    cost = expected_cost(human, TemperatureModel(T, output=temperature_output_for(human)), test, sc.cost)
    print(f"{label:>9}: held-out expected cost {cost:.2f}")
