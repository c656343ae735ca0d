#include "ppsynth/dataset.hpp"

namespace ppsynth {

namespace {

Dataset make_eight_schools() {
  Dataset d;
  d.name = "eight_schools";
  d.description = "Estimated treatment effects of coaching programs in eight schools "
                  "with known standard errors.";
  d.columns.push_back({"y", {28, 8, -3, 7, -1, 1, 18, 12}, false});
  d.columns.push_back({"sigma", {15, 10, 16, 11, 9, 11, 10, 18}, false});
  return d;
}

Dataset make_dugongs() {
  Dataset d;
  d.name = "dugongs";
  d.description = "Length measurements of dugongs at different ages; a classic "
                  "nonlinear growth-curve dataset.";
  d.columns.push_back({"X",
                       {1,    1.5,  1.5,  1.5,  2.5,  4,    5,    5,    7,
                        8,    8.5,  9,    9.5,  9.5,  10,   12,   12,   13,
                        13,   14.5, 15.5, 15.5, 16.5, 17,   22.5, 29,   31.5},
                       false});
  d.columns.push_back({"y",
                       {1.8,  1.85, 1.87, 1.77, 2.02, 2.27, 2.15, 2.26, 2.47,
                        2.19, 2.26, 2.4,  2.39, 2.41, 2.5,  2.32, 2.32, 2.43,
                        2.47, 2.56, 2.65, 2.47, 2.64, 2.56, 2.7,  2.72, 2.57},
                       false});
  return d;
}

Dataset make_surgical() {
  Dataset d;
  d.name = "surgical";
  d.description = "Mortality counts out of operations performed in twelve hospitals.";
  d.columns.push_back({"n", {47, 148, 119, 810, 211, 196, 148, 215, 207, 97, 256, 360}, true});
  d.columns.push_back({"r", {0, 18, 8, 46, 8, 13, 9, 31, 14, 8, 29, 24}, true});
  return d;
}

Dataset make_gp() {
  Dataset d;
  d.name = "gp";
  d.description = "Noisy observations of a smooth function on a regular grid with "
                  "auxiliary counts.";
  d.columns.push_back({"x", {-10, -8, -6, -4, -2, 0, 2, 4, 6, 8, 10}, false});
  d.columns.push_back({"y",
                       {4.75906, 1.59423, 2.99548, 5.27501, 1.66472, 2.24347, 2.8914,
                        4.08681, 4.60588, 0.802364, 3.92136},
                       false});
  d.columns.push_back({"k", {40, 37, 29, 12, 4, 3, 9, 19, 77, 82, 33}, true});
  return d;
}

Dataset make_peregrine() {
  Dataset d;
  d.name = "peregrine";
  d.description = "Peregrine falcon breeding pair counts over standardized years.";
  std::vector<double> year;
  for (int i = 0; i < 40; ++i) year.push_back(-0.95 + 0.05 * i);
  d.columns.push_back({"year", std::move(year), false});
  d.columns.push_back({"C",
                       {27, 42, 35, 55, 61, 19, 41, 74, 43, 42, 73, 37, 48, 49,
                        19, 72, 30, 18, 31, 71, 63, 51, 48, 73, 49, 54, 43, 59,
                        30, 24, 62, 55, 51, 47, 14, 27, 45, 20, 26, 19},
                       true});
  d.columns.push_back({"N",
                       {43, 83, 53, 91, 95, 24, 62, 91, 64, 57, 97, 56, 74, 66,
                        28, 92, 40, 23, 46, 96, 91, 75, 71, 100, 72, 77, 64, 68,
                        43, 32, 97, 92, 75, 84, 22, 58, 81, 37, 45, 39},
                       true});
  return d;
}

}  // namespace

const std::vector<std::string>& builtin_dataset_names() {
  static const std::vector<std::string> names = {"eight_schools", "dugongs", "surgical",
                                                 "peregrine", "gp"};
  return names;
}

std::optional<Dataset> builtin_dataset(const std::string& name) {
  if (name == "eight_schools") return make_eight_schools();
  if (name == "dugongs") return make_dugongs();
  if (name == "surgical") return make_surgical();
  if (name == "gp") return make_gp();
  if (name == "peregrine") return make_peregrine();
  return std::nullopt;
}

}  // namespace ppsynth
