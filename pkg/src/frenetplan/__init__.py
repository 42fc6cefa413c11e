"""Guided sampling-based motion planning toolkit with a replanning benchmark."""

from .curvilinear import (CurvilinearPoint, ProjectionDomain, ReferencePath,
                          build_reference_path, domain_contains, to_cartesian,
                          to_curvilinear)
from .environment import (EpisodeOutcome, GuidedSampling, Observation,
                          OutcomeStatus, Scenario, ScenarioParams, SimConfig,
                          UniformSampling, build_observation, compute_reward,
                          generate_scenario, run_episode, step_episode)
from .planner import (CostWeights, FeasibilityLimits, GoalSpec,
                      NeighborhoodLevel, NeighborhoodSpec, OrientedBox,
                      PlanningResult, check_collision, evaluate_cost,
                      filter_and_select, neighborhood_goals, plan_cycle,
                      uniform_goal_grid)
from .proposers import (ExternalProposer, OracleProposer, Proposer,
                        RandomProposer, external_handshake, oracle_propose)
from .trajectory import (CurvilinearState, QuarticCoeffs, QuinticCoeffs,
                         Status, TrajectoryCandidate, generate_candidate,
                         generate_candidates, kinematics_of, solve_quartic,
                         solve_quintic)

__version__ = "0.1.0"
