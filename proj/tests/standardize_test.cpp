#include <catch2/catch_amalgamated.hpp>
TEST_CASE("placeholder standardize_test") { SUCCEED(); }
