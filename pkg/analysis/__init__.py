from analysis.attack_analysis import (
    Preferred, AttackScenario, ScenarioSet, P24Frontier,
    more_preferred, covered_scenarios, coverage_weight,
    partition_cdf, client_vulnerability_cdf,
    p24_baseline_attackers, p24_baseline_frontier, tie_break_disconnect_probability,
)
from analysis.placement import RelayPlan, k_core_candidates, locate_relays, plan_relays
