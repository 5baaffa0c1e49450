from .oracle import SCENARIOS, OutcomeDistribution, enumerate_branches, mutual_information
