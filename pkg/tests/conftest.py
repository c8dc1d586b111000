import pytest

from kgstory import kb, mocks, planner, ranker
from kgstory.story import GenerationConfig

TOY_KB = """\
rain\tCauses\tflood
flood\tCauses\tdamage
damage\tCauses\trepair
repair\tHasPrerequisite\ttool
sunshine\tCauses\tjoy
joy\tCauses\tsmile
smile\tIsA\texpression
driving\tCauses\taccident
accident\tCauses\tinjury
tool\tUsedFor\trepair
eiffel tower\tAtLocation\tparis
dog\tIsA\tanimal
water park\tCapableOf\tattract visitors
"""


@pytest.fixture(scope="session")
def templates():
    return kb.default_templates()


@pytest.fixture(scope="session")
def toy_triples(templates):
    return kb.parse_triples(TOY_KB, templates)


@pytest.fixture(scope="session")
def toy_index(toy_triples, templates):
    return kb.build_index(toy_triples, templates)


@pytest.fixture
def make_pipeline(toy_index):
    def factory(generator_mode="sample", seed=0, index=None, config=None, keyword_replies=None):
        suite = mocks.mock_backend_suite(
            seed=0,
            generator_mode=generator_mode,
            keyword_mode="fixed" if keyword_replies else "rake",
            keyword_replies=keyword_replies,
        )
        heads = ranker.init_heads(16, d_out=8, seed=0)
        return planner.StoryPipeline(
            index if index is not None else toy_index,
            heads,
            suite,
            config=config if config is not None else GenerationConfig(seed=seed),
        )

    return factory
