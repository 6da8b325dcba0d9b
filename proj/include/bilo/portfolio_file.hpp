#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "bilo/space.hpp"

namespace bilo {

// Line-based portfolio definition:
//
//   # comment
//   transfer NNfilter needs-target
//     k int 1 100
//     metric cat Euc,Man,Che,Min,Mah
//   classifier KNN
//     n_neigh int 1 50
//
// A parameter line is `name int|real lower upper` or `name cat c1,c2,...`.
// Upper bounds may be one of N_s, N_t, max(N_s,N_t), N_s/10.
Portfolio parse_portfolio(std::string_view text);
Portfolio load_portfolio(const std::filesystem::path& path);
std::string format_portfolio(const Portfolio& portfolio);

// The natively implemented learners and their parameter ranges.
std::string_view default_portfolio_text();
// Every known learner and parameter range, including learners
// that only bind through `drop_unsupported`.
std::string_view full_portfolio_text();

}  // namespace bilo
