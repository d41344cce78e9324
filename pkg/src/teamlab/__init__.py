"""Finite-model laboratory for team semantics with dependency atoms."""

from .atoms import Registry, builtin_spec
from .model import Relation, Structure, Team, EMPTY_ASSIGNMENT_TEAM
from .syntax import parse_formula, to_text, validate_u_sentence, free_variables, TeamlabError
from .tarski import dep_membership, eval_tarski
from .teamsem import eval_team, check_flatness, team_family

__all__ = [
    "Registry", "builtin_spec", "Relation", "Structure", "Team", "EMPTY_ASSIGNMENT_TEAM",
    "parse_formula", "to_text", "validate_u_sentence", "free_variables", "TeamlabError",
    "dep_membership", "eval_tarski", "eval_team", "check_flatness", "team_family",
]

__version__ = "0.1.0"
