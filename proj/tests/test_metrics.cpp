#include <doctest.h>

#include <sstream>

#include "vaer/error.hpp"
#include "vaer/metrics.hpp"

using namespace vaer;
using doctest::Approx;

TEST_CASE("precision, recall and F1 from counts") {
  const auto s = metrics::scores({3, 1, 2, 4});
  CHECK(s.precision == Approx(0.75));
  CHECK(s.recall == Approx(0.6));
  CHECK(s.f1 == Approx(2 * 0.75 * 0.6 / 1.35));
  CHECK(s.f1_defined);

  const auto none = metrics::scores({0, 0, 3, 5});
  CHECK_FALSE(none.precision_defined);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.recall_defined);
  CHECK_FALSE(none.f1_defined);
}

TEST_CASE("confusion counts") {
  const int predicted[] = {1, 1, 0, 0, 1};
  const int truth[] = {1, 0, 1, 0, 1};
  const auto c = metrics::confusion(predicted, truth);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK_THROWS_AS(metrics::confusion(std::span(predicted, 2), truth), FormatError);
}

TEST_CASE("prf1 over pair sets") {
  const PairSet truth({{{"a", "x"}, 1}, {{"b", "y"}, 0}, {{"c", "z"}, 1}});
  const std::map<PairKey, int> predictions{{{"a", "x"}, 1}, {{"b", "y"}, 1}, {{"c", "z"}, 0}, {{"q", "q"}, 1}};
  const auto s = metrics::prf1(predictions, truth);
  CHECK(s.counts.tp == 1);
  CHECK(s.counts.fp == 1);
  CHECK(s.counts.fn == 1);
  CHECK(s.f1 == Approx(0.5));
  const std::map<PairKey, int> partial{{{"a", "x"}, 1}};
  CHECK_THROWS_WITH_AS(metrics::prf1(partial, truth), doctest::Contains("b"), FormatError);
}

TEST_CASE("recall at K counts either direction") {
  metrics::NeighborLists l2r{{"a", {"x", "y", "z"}}, {"b", {"z", "x"}}};
  metrics::NeighborLists r2l{{"y", {"c", "b"}}};
  const std::vector<PairKey> dups{{"a", "y"}, {"b", "y"}, {"c", "w"}, {"b", "x"}};
  CHECK(metrics::recall_at_k(l2r, r2l, dups, 1) == Approx(0.0));
  CHECK(metrics::recall_at_k(l2r, r2l, dups, 2) == Approx(0.75));
  CHECK(metrics::recall_at_k(l2r, r2l, dups, 3) == Approx(0.75));
  double previous = 0.0;
  for (std::size_t k = 1; k <= 5; ++k) {
    const double r = metrics::recall_at_k(l2r, r2l, dups, k);
    CHECK(r >= previous);
    previous = r;
  }
}

TEST_CASE("reports") {
  const metrics::ReportRow rows[] = {{"test", metrics::scores({3, 1, 2, 4})}, {"empty", metrics::scores({0, 0, 0, 1})}};
  std::ostringstream csv;
  metrics::write_report_csv(csv, rows);
  CHECK(csv.str() == "name,tp,fp,fn,tn,precision,recall,f1\n"
                     "test,3,1,2,4,0.750000,0.600000,0.666667\n"
                     "empty,0,0,0,1,0.000000,0.000000,0.000000\n");
  std::ostringstream table;
  metrics::print_report(table, rows);
  CHECK(table.str().find("undefined") != std::string::npos);
}
