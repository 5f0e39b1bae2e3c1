"""Decision protocols: consensus thresholds, voting schemes, and the judge."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

from . import paradigms, prompts
from .agents import extract_final_answer_response, extract_json_object
from .domain import (
    DebateState,
    DecisionOutcome,
    Message,
    Phase,
    TieBreak,
)
from .gateway import Backend, GatewayError, chat_request
from .paradigms import DebateContext

logger = logging.getLogger(__name__)

CONSENSUS_PROTOCOLS = frozenset(
    {"majority_consensus", "supermajority_consensus", "unanimity_consensus"}
)
VOTING_PROTOCOLS = frozenset(
    {"simple_voting", "approval_voting", "ranked_voting", "cumulative_voting"}
)
ALL_PROTOCOLS = CONSENSUS_PROTOCOLS | VOTING_PROTOCOLS | {"judge"}


class VoteParseFailure(Exception):
    pass


class BudgetExceeded(VoteParseFailure):
    pass


class DuplicateRank(VoteParseFailure):
    pass


class AllBallotsInvalid(Exception):
    pass


# Thresholds as exact rationals so boundary cases never depend on float
# rounding; the supermajority bar is the literal 66 percent.
_THRESHOLDS = {
    "majority_consensus": Fraction(1, 2),
    "supermajority_consensus": Fraction(33, 50),
}


def consensus_reached(fraction: Fraction, protocol: str) -> bool:
    if protocol == "unanimity_consensus":
        return fraction == 1
    return fraction > _THRESHOLDS[protocol]


def voting_due(turn: int, voting_after_turns: int = 3) -> bool:
    # >= rather than ==: a tie's extra round pushes past the boundary and
    # voting must still be due on the turn after it.
    return turn >= voting_after_turns


_INT_RE = re.compile(r"-?\d+")


def parse_simple_vote(text: str, k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    match = _INT_RE.search(text)
    if match is None:
        raise VoteParseFailure("no integer in ballot")
    return _normalize_index(int(match.group()), k)


def _normalize_index(value: int, k: int) -> int:
    # 1-based reading first; fall back to 0-based when that is out of range.
    if 1 <= value <= k:
        return value
    if 0 <= value <= k - 1:
        return value + 1
    raise VoteParseFailure(f"index {value} out of range for {k} solutions")


def parse_approval(text: str, k: int) -> set[int]:
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not tokens:
        raise VoteParseFailure("empty approval ballot")
    approved: set[int] = set()
    for token in tokens:
        try:
            value = int(token)
        except ValueError:
            raise VoteParseFailure(f"non-integer token {token!r}")
        approved.add(_normalize_index(value, k))
    return approved


def parse_ranked(text: str, k: int) -> list[int]:
    if k < 2:
        raise ValueError("k must be >= 2")
    tokens = text.split()
    if not tokens:
        raise VoteParseFailure("empty ranking")
    try:
        values = [int(t) for t in tokens]
    except ValueError:
        raise VoteParseFailure(f"non-integer token in ranking {text!r}")
    # A 0 anywhere marks the whole ballot as 0-based.
    if any(v == 0 for v in values):
        values = [v + 1 for v in values]
    limit = min(k, 5)
    if len(values) > limit:
        logger.warning("ranking longer than %d entries truncated: %r", limit, text)
        values = values[:limit]
    if len(values) != len(set(values)):
        raise DuplicateRank(f"duplicate rank in {values}")
    for value in values:
        if not 1 <= value <= k:
            raise VoteParseFailure(f"rank {value} out of range for {k} solutions")
    return values


def parse_cumulative(text: str, k: int, budget: int = 10) -> dict[int, int]:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    try:
        obj = extract_json_object(text)
    except (ValueError, json.JSONDecodeError):
        raise VoteParseFailure(f"no JSON object in ballot {text[:80]!r}")
    allocations: dict[int, int] = {}
    for key, value in obj.items():
        try:
            index = int(key)
        except (TypeError, ValueError):
            raise VoteParseFailure(f"non-integer solution key {key!r}")
        if not isinstance(value, int) or isinstance(value, bool):
            raise VoteParseFailure(f"points for {key!r} are not an integer")
        if value < 0:
            raise VoteParseFailure(f"negative points for solution {key}")
        allocations[index] = value
    if not allocations:
        raise VoteParseFailure("empty point allocation")
    if any(index == 0 for index in allocations):
        allocations = {index + 1: pts for index, pts in allocations.items()}
    for index in allocations:
        if not 1 <= index <= k:
            raise VoteParseFailure(f"index {index} out of range for {k} solutions")
    total = sum(allocations.values())
    if total > budget:
        raise BudgetExceeded(f"allocated {total} points, budget is {budget}")
    return allocations


def parse_ballot(protocol: str, text: str, k: int, budget: int = 10) -> Any:
    if protocol == "simple_voting":
        return parse_simple_vote(text, k)
    if protocol == "approval_voting":
        return parse_approval(text, k)
    if protocol == "ranked_voting":
        return parse_ranked(text, k)
    if protocol == "cumulative_voting":
        return parse_cumulative(text, k, budget)
    raise ValueError(f"{protocol!r} is not a voting protocol")


@dataclass
class Ballot:
    voter: int
    raw_text: str
    parsed: Any = None
    valid: bool = False
    reason: Optional[str] = None

    def to_log(self) -> dict[str, Any]:
        entry: dict[str, Any] = {"voter": self.voter, "rawText": self.raw_text}
        if self.valid:
            entry["parsed"] = _serialize_parsed(self.parsed)
        entry["valid"] = self.valid
        if self.reason is not None:
            entry["reason"] = self.reason
        return entry


def _serialize_parsed(parsed: Any) -> Any:
    if isinstance(parsed, set):
        return sorted(parsed)
    if isinstance(parsed, dict):
        return {str(k): v for k, v in sorted(parsed.items())}
    return parsed


@dataclass
class Tally:
    per_solution_score: dict[int, Fraction]
    winners: set[int]


def tally(protocol: str, ballots: list[Ballot], k: int) -> Tally:
    valid = [b for b in ballots if b.valid]
    if not valid:
        raise AllBallotsInvalid("no valid ballots to tally")
    scores: dict[int, Fraction] = {i: Fraction(0) for i in range(1, k + 1)}
    for ballot in valid:
        if protocol == "simple_voting":
            scores[ballot.parsed] += 1
        elif protocol == "approval_voting":
            for index in ballot.parsed:
                scores[index] += 1
        elif protocol == "cumulative_voting":
            for index, points in ballot.parsed.items():
                scores[index] += points
        elif protocol == "ranked_voting":
            # Borda: position p of k scores k - 1 - p; unranked stays 0.
            for position, index in enumerate(ballot.parsed):
                scores[index] += k - 1 - position
        else:
            raise ValueError(f"{protocol!r} is not a voting protocol")
    best = max(scores.values())
    winners = {i for i, score in scores.items() if score == best}
    return Tally(per_solution_score=scores, winners=winners)


@dataclass
class VoteRound:
    turn: int
    candidates: list[str]
    ballots: list[Ballot]
    tally: Optional[Tally]

    def to_log(self) -> dict[str, Any]:
        entry: dict[str, Any] = {
            "turn": self.turn,
            "candidates": list(self.candidates),
            "ballots": [b.to_log() for b in self.ballots],
        }
        if self.tally is not None:
            entry["scores"] = {
                str(i): _fraction_to_number(score)
                for i, score in sorted(self.tally.per_solution_score.items())
            }
            entry["winners"] = sorted(self.tally.winners)
        return entry


def _fraction_to_number(value: Fraction) -> Any:
    return int(value) if value.denominator == 1 else float(value)


def collect_candidates(
    state: DebateState, backend: Backend, ctx: DebateContext
) -> list[str]:
    """One extracted final answer per agent, in panel order, duplicates kept."""
    if len(state.panel) < 2:
        raise ValueError("candidate collection needs a panel of at least 2")
    candidates: list[str] = []
    for profile in state.panel:
        previous = _previous_response(state, profile.agent_id)
        resp = extract_final_answer_response(
            profile.persona,
            ctx.task_text,
            ctx.input_text,
            previous,
            backend,
            ctx.model_name,
        )
        candidates.append(resp.text)
        state.append(
            Message(
                seq=state.next_seq(),
                turn=state.turn,
                agent_id=profile.agent_id,
                phase=Phase.EXTRACTION,
                text=resp.text,
                wall_clock_ms=resp.latency_ms,
            )
        )
    return candidates


def _previous_response(state: DebateState, agent_id: int) -> str:
    for msg in reversed(state.debate_messages()):
        if msg.agent_id == agent_id:
            return msg.text
    if state.current_draft is not None:
        return state.current_draft.text
    raise ValueError(f"agent {agent_id} has no previous response to extract from")


# One initial call plus up to three re-prompts per agent before abstention.
_MAX_BALLOT_ATTEMPTS = 4


def run_vote_round(state: DebateState, backend: Backend, ctx: DebateContext) -> VoteRound:
    candidates = collect_candidates(state, backend, ctx)
    k = len(candidates)
    ballots: list[Ballot] = []
    finals: list[Ballot] = []
    for profile in state.panel:
        req = chat_request(
            [
                ("system", prompts.render_role_system(profile.persona)),
                (
                    "user",
                    prompts.render_vote_user(
                        ctx.protocol,
                        ctx.task_text,
                        ctx.input_text,
                        candidates,
                        points=ctx.cumulative_points,
                    ),
                ),
            ],
            model_name=ctx.model_name,
        )
        for _ in range(_MAX_BALLOT_ATTEMPTS):
            resp = backend.complete(req)
            try:
                parsed = parse_ballot(ctx.protocol, resp.text, k, ctx.cumulative_points)
            except VoteParseFailure as exc:
                ballots.append(
                    Ballot(profile.agent_id, resp.text, valid=False, reason=str(exc))
                )
                continue
            ballot = Ballot(profile.agent_id, resp.text, parsed=parsed, valid=True)
            ballots.append(ballot)
            finals.append(ballot)
            break
    try:
        result = tally(ctx.protocol, finals, k) if finals else None
    except AllBallotsInvalid:
        result = None
    return VoteRound(turn=state.turn, candidates=candidates, ballots=ballots, tally=result)


def judge_decide(
    state: DebateState, backend: Backend, ctx: DebateContext, candidates: list[str]
) -> DecisionOutcome:
    if not candidates:
        raise ValueError("the judge needs at least one candidate")
    req = chat_request(
        [("user", prompts.render_judge_user(ctx.task_text, ctx.input_text, candidates))],
        model_name=ctx.model_name,
    )
    try:
        resp = backend.complete(req)
    except GatewayError as exc:
        return DecisionOutcome(
            protocol="judge",
            final_text=candidates[0],
            success=False,
            decided_at_turn=state.turn,
            fallback_reason=f"judge call failed: {exc}",
        )
    # The judge sits outside the panel; agent_id 0 marks that in the log.
    state.append(
        Message(
            seq=state.next_seq(),
            turn=state.turn,
            agent_id=0,
            phase=Phase.JUDGE,
            text=resp.text,
            wall_clock_ms=resp.latency_ms,
        )
    )
    return DecisionOutcome(
        protocol="judge",
        final_text=resp.text,
        success=True,
        decided_at_turn=state.turn,
    )


def decide(
    state: DebateState, backend: Backend, ctx: DebateContext
) -> Optional[DecisionOutcome]:
    """Protocol check after a completed turn; None means keep debating."""
    protocol = ctx.protocol
    draft_text = state.current_draft.text if state.current_draft else ""
    if protocol in CONSENSUS_PROTOCOLS:
        if consensus_reached(state.agreement_fraction(), protocol):
            return DecisionOutcome(protocol, draft_text, True, state.turn)
        if state.turn >= ctx.max_turns:
            return DecisionOutcome(
                protocol,
                draft_text,
                False,
                state.turn,
                fallback_reason="turn cap reached without consensus",
            )
        return None

    if not voting_due(state.turn, ctx.voting_after_turns):
        if state.turn >= ctx.max_turns:
            return DecisionOutcome(
                protocol,
                draft_text,
                False,
                state.turn,
                fallback_reason="turn cap reached before the voting turn",
            )
        return None

    if protocol == "judge":
        candidates = collect_candidates(state, backend, ctx)
        return judge_decide(state, backend, ctx, candidates)

    rounds = [run_vote_round(state, backend, ctx)]
    if rounds[0].tally is None:
        return DecisionOutcome(
            protocol,
            draft_text,
            False,
            state.turn,
            vote_detail=[r.to_log() for r in rounds],
            fallback_reason="all ballots invalid after re-prompts",
        )
    winners = sorted(rounds[0].tally.winners)
    if len(winners) == 1:
        return DecisionOutcome(
            protocol,
            rounds[0].candidates[winners[0] - 1],
            True,
            state.turn,
            vote_detail=[r.to_log() for r in rounds],
        )
    if state.turn >= ctx.max_turns:
        # No room for the extra round; settle on the lowest tied index.
        return DecisionOutcome(
            protocol,
            rounds[0].candidates[winners[0] - 1],
            True,
            state.turn,
            vote_detail=[r.to_log() for r in rounds],
            tie_broken=TieBreak.DETERMINISTIC_INDEX,
        )

    paradigms.run_turn(ctx.paradigm, state, backend, ctx)
    rounds.append(run_vote_round(state, backend, ctx))
    if rounds[1].tally is None:
        return DecisionOutcome(
            protocol,
            state.current_draft.text if state.current_draft else "",
            False,
            state.turn,
            vote_detail=[r.to_log() for r in rounds],
            fallback_reason="all ballots invalid in the tie-break round",
        )
    winners = sorted(rounds[1].tally.winners)
    tie_break = TieBreak.EXTRA_ROUND if len(winners) == 1 else TieBreak.DETERMINISTIC_INDEX
    return DecisionOutcome(
        protocol,
        rounds[1].candidates[winners[0] - 1],
        True,
        state.turn,
        vote_detail=[r.to_log() for r in rounds],
        tie_broken=tie_break,
    )
