"""Bundled reference decompositions.

These back the scripted chat client so the full pipeline runs offline, and
they double as the round-trip corpus for the reply renderer and parser. Each
row is a target prompt with its known-good proxy sequence and switch steps.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..clients import normalize_prompt_key


@dataclass(frozen=True)
class FixtureDecomposition:
    target: str
    explanation: str
    prompts: tuple[str, ...]
    switch_steps: tuple[int, ...]


FIXTURE_DECOMPOSITIONS: tuple[FixtureDecomposition, ...] = (
    FixtureDecomposition(
        target="A grown man has a baby's pacifier in his mouth.",
        explanation=(
            "A pacifier is strongly associated with infants, so the model resists "
            "placing it in an adult's mouth. Starting with a neutral small object "
            "stabilizes the face and mouth region before the pacifier is named."
        ),
        prompts=(
            "A grown man with a small object in his mouth",
            "A grown man has a baby's pacifier in his mouth",
        ),
        switch_steps=(4,),
    ),
    FixtureDecomposition(
        target="A dragon is blowing water.",
        explanation=(
            "Dragons are associated with breathing fire, not water. White smoke is a "
            "visually similar stream that keeps the pose and flow intact until the "
            "water can be introduced."
        ),
        prompts=("A dragon blowing white smoke", "A dragon blowing water"),
        switch_steps=(3,),
    ),
    FixtureDecomposition(
        target="A pizza with grape toppings.",
        explanation=(
            "Grapes are unusual on pizza, so the layout starts from a familiar "
            "topping of similar size and placement before switching to grapes."
        ),
        prompts=("A pizza with pepperoni toppings", "A pizza with grape toppings"),
        switch_steps=(3,),
    ),
    FixtureDecomposition(
        target="A coin floats on the surface of the water.",
        explanation=(
            "Coins sink, so the model fights a floating coin. A leaf is a natural "
            "floating object with a similar footprint, grounding the scene before "
            "the coin replaces it."
        ),
        prompts=(
            "A leaf floats on the surface of the water",
            "A coin floats on the surface of the water",
        ),
        switch_steps=(4,),
    ),
    FixtureDecomposition(
        target="A cockatoo parrot swimming in the ocean.",
        explanation=(
            "Parrots do not swim, so the scene starts from a swimming bird with a "
            "similar silhouette, moves to a generic parrot, and only then names the "
            "cockatoo."
        ),
        prompts=(
            "A duck swimming in the ocean",
            "A parrot swimming in the ocean",
            "A cockatoo parrot swimming in the ocean",
        ),
        switch_steps=(3, 6),
    ),
    FixtureDecomposition(
        target="A woman writing with a dart.",
        explanation=(
            "A dart is not a writing tool, so the hand pose is stabilized with a pen "
            "before the dart is substituted in."
        ),
        prompts=("A woman writing with a pen", "A woman writing with a dart"),
        switch_steps=(3,),
    ),
    FixtureDecomposition(
        target="Shrek is blue.",
        explanation=(
            "Shrek is canonically green, so the model resists recoloring him. A "
            "generic blue ogre fixes the color and body shape before the identity "
            "is named."
        ),
        prompts=("A blue ogre", "Shrek is blue"),
        switch_steps=(3,),
    ),
)


def scripted_fixture_map() -> dict[str, tuple[str, tuple[str, ...], tuple[int, ...]]]:
    """Fixture rows keyed for the scripted chat client, including the default
    in-context examples so familiar demo prompts resolve to their known
    decompositions."""
    from .instruction import DEFAULT_EXAMPLES

    table: dict[str, tuple[str, tuple[str, ...], tuple[int, ...]]] = {}
    for row in FIXTURE_DECOMPOSITIONS:
        table[normalize_prompt_key(row.target)] = (row.explanation, row.prompts, row.switch_steps)
    for ex in DEFAULT_EXAMPLES:
        table[normalize_prompt_key(ex.target)] = (ex.explanation, ex.prompts, ex.switch_steps)
    return table
