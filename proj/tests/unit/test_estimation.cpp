// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "bloch_oracle.hpp"
#include "generators.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/estimation.hpp"

namespace qkdsim {
namespace {

using testing::for_all;
using testing::Gen;

constexpr double kPi = std::numbers::pi;
const double kRootTwo = std::sqrt(2.0);

RoundRecord s1_record(int x1, int y1, int a, int b_sifted) {
  RoundRecord r;
  r.x = {x1, a};
  r.y = {y1, 0};
  r.alice_bit = a;
  r.announcement = Announcement::psi_plus;
  r.sift_tag = SiftSet::S1;
  r.bob_bit_sifted = b_sifted;
  return r;
}

CondProbTable::Cell uniform_cell() { return {0.25, 0.25, 0.25, 0.25}; }

TEST(CondProbTable, ValidatesRows) {
  std::array<CondProbTable::Cell, 4> p{uniform_cell(), uniform_cell(), uniform_cell(),
                                       uniform_cell()};
  EXPECT_NO_THROW(CondProbTable::exact(p));
  p[2] = {0.5, 0.5, 0.5, 0.0};
  EXPECT_THROW(CondProbTable::exact(p), InvalidArgument);
  p[2] = {1.2, -0.2, 0.0, 0.0};
  EXPECT_THROW(CondProbTable::exact(p), InvalidArgument);
}

TEST(CondProbTable, IndexingAndCorrelator) {
  std::array<CondProbTable::Cell, 4> p{uniform_cell(), uniform_cell(), uniform_cell(),
                                       uniform_cell()};
  p[1] = {0.4, 0.1, 0.2, 0.3};  // x = 0, y = 1
  const auto t = CondProbTable::exact(p);
  EXPECT_DOUBLE_EQ(t(0, 1, 0, 1), 0.1);
  EXPECT_DOUBLE_EQ(t(1, 0, 0, 1), 0.2);
  EXPECT_NEAR(t.correlator(0, 1), 0.4 - 0.1 - 0.2 + 0.3, 1e-15);
}

TEST(Chsh, PerfectCorrelationsGiveTwo) {
  // E = +1 in three cells and -1 in (1,1): a local deterministic box.
  const CondProbTable::Cell same = {0.5, 0.0, 0.0, 0.5};
  const CondProbTable::Cell diff = {0.0, 0.5, 0.5, 0.0};
  const auto t = CondProbTable({same, same, same, diff}, {100, 100, 100, 100});
  const auto g = chsh_value(t);
  EXPECT_DOUBLE_EQ(g.value, 4.0);
  EXPECT_DOUBLE_EQ(g.std_error, 0.0);
  EXPECT_EQ(g.sample_size, 400U);
}

TEST(Chsh, StandardErrorFromBinomialCells) {
  const double q = 0.5 + kRootTwo / 4;  // E = 1/sqrt 2
  const CondProbTable::Cell plus = {q / 2, (1 - q) / 2, (1 - q) / 2, q / 2};
  const CondProbTable::Cell minus = {(1 - q) / 2, q / 2, q / 2, (1 - q) / 2};
  const auto t = CondProbTable({plus, plus, plus, minus}, {1000, 2000, 4000, 8000});
  const auto g = chsh_value(t);
  EXPECT_NEAR(g.value, 2 * kRootTwo, 1e-12);
  const double var = 0.5 * (1.0 / 1000 + 1.0 / 2000 + 1.0 / 4000 + 1.0 / 8000);
  EXPECT_NEAR(g.std_error, std::sqrt(var), 1e-15);
}

TEST(ConditionalTable, CountsAndFrequencies) {
  std::vector<RoundRecord> s1;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      for (int k = 0; k < 3; ++k) s1.push_back(s1_record(x, y, 0, 0));
      s1.push_back(s1_record(x, y, 1, 0));
    }
  }
  const auto t = conditional_table(s1, 4);
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      EXPECT_DOUBLE_EQ(t(0, 0, x, y), 0.75);
      EXPECT_DOUBLE_EQ(t(1, 0, x, y), 0.25);
      EXPECT_EQ(t.counts()[2 * x + y], 4U);
    }
  }
}

TEST(ConditionalTable, StarvedCellNamed) {
  std::vector<RoundRecord> s1;
  for (int k = 0; k < 200; ++k) {
    s1.push_back(s1_record(0, 0, 0, 0));
    s1.push_back(s1_record(0, 1, 0, 0));
    s1.push_back(s1_record(1, 0, 0, 0));
  }
  for (int k = 0; k < 50; ++k) s1.push_back(s1_record(1, 1, 0, 0));
  try {
    conditional_table(s1, 100);
    FAIL() << "expected InsufficientData";
  } catch (const InsufficientData& e) {
    EXPECT_NE(std::string(e.what()).find("(x=1,y=1)"), std::string::npos) << e.what();
  }
}

TEST(ConditionalTable, RejectsKeyBasisRecords) {
  std::vector<RoundRecord> s1 = {s1_record(0, 2, 0, 0)};
  EXPECT_THROW(conditional_table(s1, 1), InvalidArgument);
}

TEST(Qber, FractionOfDisagreements) {
  std::vector<RoundRecord> s2(10);
  for (int i = 0; i < 10; ++i) {
    s2[i].alice_bit = 0;
    s2[i].bob_bit_sifted = i < 3 ? 1 : 0;
  }
  const auto e = qber(s2);
  EXPECT_DOUBLE_EQ(e.value, 0.3);
  EXPECT_NEAR(e.std_error, std::sqrt(0.3 * 0.7 / 10), 1e-15);
  EXPECT_EQ(e.sample_size, 10U);
  EXPECT_THROW(qber(std::span<const RoundRecord>{}), InsufficientData);
}

TEST(TableJson, RoundTrip) {
  const auto t = analytic_table(SessionConfig{});
  const auto j = to_json(t);
  EXPECT_TRUE(j.contains("pab_xy"));
  EXPECT_TRUE(j.contains("counts"));
  const auto back = table_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.cells(), t.cells());
  EXPECT_EQ(back.counts(), t.counts());
}

TEST(AnalyticTable, IdealReachesTsirelson) {
  const auto g = chsh_value(analytic_table(SessionConfig{}));
  EXPECT_NEAR(g.value, 2 * kRootTwo, 1e-9);
  EXPECT_EQ(g.sample_size, 0U);
  EXPECT_EQ(g.std_error, 0.0);
}

TEST(AnalyticTable, ClassicalRelayNotApplicable) {
  SessionConfig c;
  c.eve = bundled_classical_strategy("z_intercept");
  EXPECT_THROW(analytic_table(c), NotApplicable);
}

TEST(AnalyticTable, SymmetricDepolarizingFormula) {
  for (double p : {0.0, 0.02, 0.05, 0.1, 0.3, 0.6, 1.0}) {
    SessionConfig c;
    c.channel_a = {Channel::depolarizing(p)};
    c.channel_b = {Channel::depolarizing(p)};
    EXPECT_NEAR(chsh_value(analytic_table(c)).value, 2 * kRootTwo * (1 - p) * (1 - p), 1e-12) << p;
  }
}

TEST(AnalyticTable, MisalignmentFormula) {
  for (double delta : {0.0, 0.1, kPi / 16, kPi / 8, 0.7}) {
    SessionConfig c;
    c.channel_a = {Channel::misalignment(delta)};
    EXPECT_NEAR(chsh_value(analytic_table(c)).value, 2 * kRootTwo * std::cos(2 * delta), 1e-12);
  }
}

TEST(AnalyticTable, LossDoesNotChangeStatistics) {
  SessionConfig c;
  c.channel_a = {Channel::depolarizing(0.1)};
  const auto reference = analytic_table(c).cells();
  c.channel_a.push_back(Channel::loss(0.3));
  const auto lossy = analytic_table(c).cells();
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(lossy[i][k], reference[i][k], 1e-15);
  }
}

TEST(AnalyticTableProperty, MatchesBlochVectorModel) {
  for_all(300, 21, [](Gen& gen) {
    testing::LinkNoise na{gen.uniform(0, 0.5), gen.uniform(-kPi / 4, kPi / 4)};
    testing::LinkNoise nb{gen.uniform(0, 0.5), gen.uniform(-kPi / 4, kPi / 4)};
    auto mixture = [&gen](std::vector<testing::Component>& oracle) {
      const auto w = gen.simplex(static_cast<std::size_t>(gen.integer(1, 3)));
      std::vector<MixtureComponent> comps;
      for (double wi : w) {
        const double offset = gen.uniform(-0.5, 0.5);
        comps.push_back({wi, offset});
        oracle.push_back({wi, offset});
      }
      return HiddenVariableMixture(comps);
    };
    std::vector<testing::Component> oa;
    std::vector<testing::Component> ob;
    SessionConfig c;
    c.alice_mixture = mixture(oa);
    c.bob_mixture = mixture(ob);
    c.channel_a = {Channel::depolarizing(na.depolarizing), Channel::misalignment(na.misalignment)};
    c.channel_b = {Channel::depolarizing(nb.depolarizing), Channel::misalignment(nb.misalignment)};

    const auto expected = testing::bloch_table(oa, ob, na, nb, kS1BobFlip);
    const auto table = analytic_table(c);
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < 4; ++k) EXPECT_NEAR(table.cells()[i][k], expected[i][k], 1e-12);
    }
    EXPECT_NEAR(chsh_value(table).value, testing::chsh_from(expected), 1e-12);
  });
}

TEST(AnalyticTableProperty, NeverExceedsTsirelson) {
  for_all(300, 22, [](Gen& gen) {
    SessionConfig c;
    c.channel_a = {Channel::misalignment(gen.angle())};
    c.channel_b = {Channel::depolarizing(gen.uniform(0, 1))};
    c.alice_mixture = HiddenVariableMixture({{0.5, gen.angle()}, {0.5, gen.angle()}});
    EXPECT_LE(std::abs(chsh_value(analytic_table(c)).value), 2 * kRootTwo + 1e-12);
  });
}

TEST(MonteCarlo, NoisyConfigMatchesAnalyticTable) {
  SessionConfig c;
  c.rounds = 400000;
  c.master_seed = 31;
  c.channel_a = {Channel::depolarizing(0.1), Channel::misalignment(0.2)};
  c.bob_mixture = HiddenVariableMixture({{0.6, 0.0}, {0.4, 0.3}});
  const auto sets = sift(run_session(c, 2));
  const auto mc = conditional_table(sets.s1);
  const auto exact = analytic_table(c);
  for (int i = 0; i < 4; ++i) {
    const double n = static_cast<double>(mc.counts()[i]);
    for (int k = 0; k < 4; ++k) {
      const double p = exact.cells()[i][k];
      EXPECT_NEAR(mc.cells()[i][k], p, 4 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
  }
}

}  // namespace
}  // namespace qkdsim
