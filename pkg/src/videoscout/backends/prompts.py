"""Prompt templates for the chat-model backends.

The template texts are load-bearing: the wire-conformance tests freeze their
rendered form as golden files, so any edit here must update those files too.
Placeholders use ``{name}`` tokens and are substituted by literal replacement
(not ``str.format``) because the templates themselves contain JSON braces.
"""
from __future__ import annotations

from typing import Optional, Sequence

from ..core import RewardRecord, SegmentInterval, Timestamp
from ..errors import RejectedInput
from .base import CandidateView, PolicyRequest, RewardRequest, option_labels

REWARD_FIRST_TEMPLATE = """\
/* Task Description */
You are acting as a reward model to guide the video question-answering process, with access to a {duration}-frame video ({duration} seconds in duration). You are provided with {frame_number} uniformly sampled frames from the video, at the following frame indices: {frame_block}, which divide the video into {segment_number} distinct segments.

/* Segment Information */
{segment_block}

/* Reward Instruction */
Your task is to evaluate the relevance of each segment in answering the question below, to assist in identifying the segment(s) that most effectively answer the question.
Question: {question}
Options: {options}
Treat the start and end frames of every sub-segment as cues for reconstructing what the segment might contain. Use these cues to judge how informative the segment is for answering the question and assign a score between 0% and 100%. Explain how the boundary frames shape your interpretation and why they lead you to the assigned relevance score. Please give the answer in the format: {"Segment #": {"explanation": str, "score": int}}
"""

REWARD_FOLLOWING_TEMPLATE = """\
/* Task Description */
You are acting as a reward model in a multi-round video question-answering process. You have access to a {duration}-frame video ({duration} seconds), along with results from a previous round of evaluation. In this round, one specific segment has been further divided to provide more detailed analysis. You are provided with {N} new sampled frames to assess these sub-segments in relation to the question, at the following frame indices: {frame_block}.

/* Goal Question and Options*/
Question:{question}
Options:{options}

/* Historical Segment Information */
In the last round, the video was divided into {candidate_count} segments, each evaluated for its relevance to the goal question. Here are the results from all previous rounds:
{historical_block}

/* Current Segment Information */
In this round, segment {parent_label} has been further explored with {frame_number} new uniformly sampled frames, dividing it into {segment_number} new sub-segments:
{segment_block}

/* Reward Instruction */
Your task is to evaluate these new sub-segments for relevance to the original goal question based on provided frames, while considering the context and results from previous rounds. Treat the start and end frames of every sub-segment as cues for reconstructing what the segment might contain. Use these cues to judge how informative the segment is for answering the question and assign a score between 0% and 100%. Explain how the boundary frames shape your interpretation and why they lead you to the assigned relevance score. Please respond in the format: {"Segment #": {"explanation": str, "score": int}}
"""

SELECTION_TEMPLATE = """\
/* Task Description */
You are a helpful assistant with access to a video that is {duration} frames long ({duration} seconds).
You are tasked with exploring the video to gather the information needed to answer a specific question with complete confidence.
Question:{question}
Options:{options}
At each step, you may select one segment of the video to examine. Once you choose a segment, you will receive a set of representative frames sampled from that segment. Use each exploration step strategically to uncover key details, progressively refining your understanding of the video’s content. Continue exploring as needed until you have acquired all information necessary to answer the question.
In this round, you are provided with {memory_count} sampled frames stored in the memory module, with frame indices: {memory_indices}. In the history exploration process, the video has been divided into {candidate_total} distinct segments, each covering a specific interval. The interval and relevance score for each segment are detailed below.

/* Segment Information */
{candidate_block}

/* Exploration Instruction */
For each segment, we provide a fused score that adaptively combines two components to support your exploration: (1) an intrinsic reward, computed by an auxiliary video assistant based on the segment’s relevance to the question, and (2) a query score that reflects how many relevant clips are contained in the segment . Focus on the segments most likely to contain key information for confidently answering the question. Now, proceed with your exploration, selecting the segment you wish to explore. Please provide your choice in the following format: {Segment: int}.

Before drawing a conclusion, examine the relevant details as thoroughly as possible to gather sufficient information. Every action you take should aim to deepen your understanding of the video, especially the parts related to the question. You have ample time, so focus on providing the most accurate answer possible.

If you have enough information to answer the question, select the best answer from the options and directly provide the answer without giving any explanation.
"""

QUERY_GENERATION_TEMPLATE = """\
/* Role */
Produce short text queries for a VideoCLIP-style retriever.

/* Input */
ONE multiple-choice question about a video (with options).
Question: {question}
Options: {options}

/* Goal */
Do not answer the question. Convert the question into 1--5 stand-alone semantic queries that can be fed directly into the text encoder to retrieve relevant clips.

/* Output Format */
- Return only a JSON array of strings, length 1--5, no extra text.
- Each query must contain 6--12 lowercase words, concise and concrete.

/* Writing Rules */
1) Prefer copying key phrases from the question/options; avoid adding specific names, places, colors, or timestamps that are not present in the input.
2) If the question includes a temporal anchor (e.g., "after the interview with xxx"), include that anchor verbatim.
3) Each query should be a compact description: [temporal anchor if any] + [target from options] + [simple action or neutral cue].
4) No duplicates. If fewer high-quality queries are possible, output fewer.

/* Example Format Only (not content) */
Reply strictly in JSON format as:
{"query1": "...", "query2": "...", ...}
with no additional text.
"""

QUERY_UPDATE_TEMPLATE = """\
You are a video-understanding assistant.

/* Input Information */
- Frames with timestamps: {time_of_frames}
- A multiple-choice question with options
Question: {question}
Options: {options}
- Historical semantic queries information (already known):
{history_queries}

/* Task */
From the current frames only, extract new, concrete semantic queries that can guide subsequent retrieval or exploration toward answering the question.

/* Strict Rules */
1) Output only short, concrete semantic queries (nouns or verb-noun phrases with less than 10 words). No full sentences.
2) Each query must be directly grounded in the provided frames and must not appear in the historical information.
3) Avoid generic words ("scene", "shot", "clip") and avoid speculation (no unseen colors, names, or places).
4) Provide 2--5 items. If no new cues exist, return an empty dict {}.
5) Prefer salient, discriminative tokens that are easy to search (objects, OCR snippets, logos, tools, distinctive props, on-screen text, gestures, sound-indicated events).

/* Output Format */
Reply strictly in JSON as:
{"query1": "...", "query2": "...", ...}
with no extra text.

/* Negative Example (do NOT do this) */
- ["Frame 6 shows the villain in a shattered mirror environment with broken glass pieces around"]
"""

# Appended to the selection prompt when the engine has exhausted its round or
# frame budget and requires an answer rather than another exploration step.
FORCE_ANSWER_DIRECTIVE = (
    "You have reached the exploration limit and must answer now. Select the "
    "best answer from the options and reply with only its option letter."
)


def _fill(template: str, mapping: dict[str, object]) -> str:
    """Substitute {key} tokens literally.  Every key must occur in the template."""
    out = template
    for key, value in mapping.items():
        token = "{" + key + "}"
        if token not in out:
            raise RejectedInput(f"template has no placeholder {token}")
        out = out.replace(token, str(value))
    return out


# ============================================================
# Block formatting
# ============================================================

def fmt_timestamp(t: Timestamp) -> str:
    """Render 30.0 as "30" and 30.5 as "30.5"."""
    t = float(t)
    if t.is_integer():
        return str(int(t))
    return format(t, "g")


def format_frame_block(times: Sequence[Timestamp]) -> str:
    return ", ".join(fmt_timestamp(t) for t in times)


def format_segment_block(segments: Sequence[SegmentInterval]) -> str:
    lines = []
    for i, seg in enumerate(segments):
        lines.append(f"Segment {i}: [{fmt_timestamp(seg.start)}s, {fmt_timestamp(seg.end)}s]")
    return "\n".join(lines)


def format_options(options: Sequence[str]) -> str:
    labels = option_labels(options)
    return ", ".join(f"{label}. {text}" for label, text in zip(labels, options))


def format_historical_block(history: Sequence[RewardRecord]) -> str:
    lines = []
    for rec in history:
        span = f"[{fmt_timestamp(rec.interval.start)}s, {fmt_timestamp(rec.interval.end)}s]"
        lines.append(f"Round {rec.round_index} Segment {span}: "
                     f"score={rec.score}, explanation={rec.explanation}")
    return "\n".join(lines)


def format_candidate_block(candidates: Sequence[CandidateView]) -> str:
    lines = []
    for cand in candidates:
        span = f"[{fmt_timestamp(cand.interval.start)},{fmt_timestamp(cand.interval.end)}]"
        lines.append(f"Segment {cand.label}: span={span}, "
                     f"score={cand.fused_score:.4f}, explanation={cand.explanation}")
    return "\n".join(lines)


def format_memory_indices(times: Sequence[Timestamp]) -> str:
    return ", ".join(fmt_timestamp(t) for t in times)


def format_time_of_frames(times: Sequence[Timestamp]) -> str:
    return ", ".join(f"{fmt_timestamp(t)}s" for t in times)


def format_history_queries(texts: Sequence[str]) -> str:
    if not texts:
        return "(none)"
    return "\n".join(f"- {t}" for t in texts)


# ============================================================
# Renderers
# ============================================================

def render_reward_first(*, duration: float, frames: Sequence[Timestamp],
                        segments: Sequence[SegmentInterval], question: str,
                        options: Sequence[str]) -> str:
    return _fill(REWARD_FIRST_TEMPLATE, {
        "duration": fmt_timestamp(duration),
        "frame_number": len(frames),
        "frame_block": format_frame_block(frames),
        "segment_number": len(segments),
        "segment_block": format_segment_block(segments),
        "question": question,
        "options": format_options(options),
    })


def render_reward_following(*, duration: float, frames: Sequence[Timestamp],
                            segments: Sequence[SegmentInterval], question: str,
                            options: Sequence[str], candidate_count: int,
                            history: Sequence[RewardRecord],
                            parent_label: int) -> str:
    return _fill(REWARD_FOLLOWING_TEMPLATE, {
        "duration": fmt_timestamp(duration),
        "N": len(frames),
        "frame_number": len(frames),
        "frame_block": format_frame_block(frames),
        "segment_number": len(segments),
        "segment_block": format_segment_block(segments),
        "question": question,
        "options": format_options(options),
        "candidate_count": candidate_count,
        "historical_block": format_historical_block(history),
        "parent_label": parent_label,
    })


def render_reward_request(request: RewardRequest) -> str:
    if request.round_kind == "first":
        return render_reward_first(
            duration=request.video_duration, frames=request.frames,
            segments=request.segments, question=request.question,
            options=request.options)
    return render_reward_following(
        duration=request.video_duration, frames=request.frames,
        segments=request.segments, question=request.question,
        options=request.options, candidate_count=request.candidate_count,
        history=request.history, parent_label=request.parent_label)


def render_selection(*, duration: float, question: str, options: Sequence[str],
                     memory_times: Sequence[Timestamp],
                     candidates: Sequence[CandidateView]) -> str:
    return _fill(SELECTION_TEMPLATE, {
        "duration": fmt_timestamp(duration),
        "question": question,
        "options": format_options(options),
        "memory_count": len(memory_times),
        "memory_indices": format_memory_indices(memory_times),
        "candidate_total": len(candidates),
        "candidate_block": format_candidate_block(candidates),
    })


def render_policy_request(request: PolicyRequest) -> str:
    text = render_selection(
        duration=request.video_duration, question=request.question,
        options=request.options, memory_times=request.memory_times,
        candidates=request.candidates)
    if request.force_answer:
        text = text + "\n" + FORCE_ANSWER_DIRECTIVE + "\n"
    return text


def render_query_generation(*, question: str, options: Sequence[str]) -> str:
    return _fill(QUERY_GENERATION_TEMPLATE, {
        "question": question,
        "options": format_options(options),
    })


def render_query_update(*, frame_times: Sequence[Timestamp], question: str,
                        options: Sequence[str],
                        history_queries: Sequence[str]) -> str:
    return _fill(QUERY_UPDATE_TEMPLATE, {
        "time_of_frames": format_time_of_frames(frame_times),
        "question": question,
        "options": format_options(options),
        "history_queries": format_history_queries(history_queries),
    })
