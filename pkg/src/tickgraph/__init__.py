"""tickgraph: action bigraph rewriting with digital clocks.

Library surface: the bigraph value types and constructors, occurrence
matching with canonical forms, weighted prioritised reaction rules, the
digital-clocks layer, exhaustive MDP exploration with PRISM/DOT export,
bigraph-pattern labelling with a small probabilistic checker, and the
`.big` language front end.
"""

from .bigraph import (
    Bigraph,
    Control,
    Link,
    close,
    empty,
    ion,
    merge,
    merge_all,
    nest,
    parallel,
    parallel_all,
    site,
    validate,
)
from .canon import canonical_digest, canonical_form, decode_canonical, is_iso
from .clocks import (
    ClockConfig,
    GuardSpec,
    build_clock_perspective,
    encode_invariant,
    gen_clock_advance,
    timed_rule,
)
from .elaborate import ElabError, elaborate, load_model
from .lang import ParseError, parse, pretty
from .match import Match, occurrences
from .mdp import (
    ExplorationLimit,
    ExploreLimits,
    Mdp,
    explore,
    export_dot,
    export_prism,
)
from .params import Arith, Var
from .rules import (
    Model,
    PrioritySpec,
    ReactionRule,
    RuleEntry,
    RuleFamily,
    action_distribution,
    apply,
    enabled_outcomes,
    expand,
)
from .verify import (
    ForcedNext,
    Inevitable,
    Pattern,
    Reach,
    Safety,
    Verdict,
    check,
    label,
    parse_properties,
    reach_prob,
)

__version__ = "0.1.0"
