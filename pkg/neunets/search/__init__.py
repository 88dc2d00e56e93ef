from neunets.search.hyperband.plugin import HyperbandSynthesizer
from neunets.search.ncevolve.plugin import NcevolveSynthesizer
from neunets.search.plugin import (
    AbstractSynthesizer,
    Assessment,
    CandidateResult,
    Proposal,
    SynthesisContext,
    UnknownSynthesizerError,
    get_synthesizer,
    synthesizer_registry,
)
from neunets.search.tapas.plugin import TapasSynthesizer

synthesizer_registry.update({s.name: s for s in [NcevolveSynthesizer, TapasSynthesizer, HyperbandSynthesizer]})
