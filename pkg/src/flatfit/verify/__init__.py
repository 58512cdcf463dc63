"""Lemma verifiers, planted instances and brute-force oracles."""
from .lemmas import LEMMA_IDS, VerdictReport, verify_all, verify_lemma
from .oracles import brute_force_clustering, set_partitions
from .planted import PlantedInstance, assignment_accuracy, gen_planted, regenerate

__all__ = [
    "LEMMA_IDS",
    "PlantedInstance",
    "VerdictReport",
    "assignment_accuracy",
    "brute_force_clustering",
    "gen_planted",
    "regenerate",
    "set_partitions",
    "verify_all",
    "verify_lemma",
]
