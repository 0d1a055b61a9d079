import pytest

from farloc.farmem import Space, SpaceConfig


@pytest.fixture
def make_space():
    def build(page_size=4096, local_capacity=0, cache_pages=0):
        return Space(SpaceConfig(page_size, local_capacity, cache_pages))
    return build


@pytest.fixture
def space_with_page_blocks():
    """A space plus one full-page block per page, so a test can fault exact
    pages by touching the matching handle."""
    def build(cache_pages, n_pages, page_size=4096, local_capacity=0):
        space = Space(SpaceConfig(page_size, local_capacity, cache_pages))
        handles = []
        for _ in range(n_pages):
            page = space.create_page()
            handles.append(space.carve_in_page(page, page_size))
        return space, handles
    return build
