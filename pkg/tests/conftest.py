import pytest

from corpus_def import CORPUS, build_stream


class CorpusCache:
    """Session-wide lazily built corpus streams (encodes are expensive)."""

    def __init__(self):
        self._streams = {}

    def get(self, name: str):
        if name not in self._streams:
            from corpus_def import CORPUS_BY_NAME
            self._streams[name] = build_stream(CORPUS_BY_NAME[name])
        return self._streams[name]

    def names(self):
        return [s.name for s in CORPUS]


@pytest.fixture(scope="session")
def corpus_cache():
    return CorpusCache()
