#include <catch2/catch_amalgamated.hpp>
#include "mmgr/mmgr.hpp"

TEST_CASE("smoke") { REQUIRE(mmgr::shape_numel({2,3}) == 6); }
