#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "factorbayes/scoring.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using factorbayes::Dataset;
using factorbayes::ScoredPartition;
using factorbayes::SetPartition;
using factorbayes::bayes_factor_two_binary;
using factorbayes::block_log_score;
using factorbayes::log_beta_one_plus;
using factorbayes::log_marginal_likelihood;
using factorbayes::log_multinomial_coefficient;
using factorbayes::two_binary_scores;
using testsupport::two_binary_dataset;

TEST_CASE("log multivariate Beta of 1 + counts") {
  std::vector<int64_t> zeros{0, 0};
  CHECK_THAT(log_beta_one_plus(zeros), WithinAbs(0.0, 1e-15));  // B(1,1) = 1

  // B(2,2) = Gamma(2)Gamma(2)/Gamma(4) = 1/6
  std::vector<int64_t> ones{1, 1};
  CHECK_THAT(log_beta_one_plus(ones), WithinAbs(std::log(1.0 / 6.0), 1e-12));

  // B(3,1,1,1) = Gamma(3)/Gamma(6) = 2/120 = 1/60
  std::vector<int64_t> skewed{2, 0, 0, 0};
  CHECK_THAT(log_beta_one_plus(skewed), WithinAbs(std::log(1.0 / 60.0), 1e-12));

  std::vector<int64_t> empty;
  CHECK_THROWS_AS(log_beta_one_plus(empty), std::invalid_argument);
  std::vector<int64_t> negative{1, -1};
  CHECK_THROWS_AS(log_beta_one_plus(negative), std::invalid_argument);
}

TEST_CASE("marginal likelihood of the worked two-binary example") {
  // counts (1,0,0,1): one (0,0) row and one (1,1) row
  Dataset d = two_binary_dataset(1, 0, 0, 1);

  ScoredPartition dep = log_marginal_likelihood(d, SetPartition::one_block(2), true);
  REQUIRE(dep.full_log_marginal.has_value());
  // 6/((N+1)(N+2)(N+3)) at N = 2 is 1/10
  CHECK_THAT(*dep.full_log_marginal, WithinAbs(std::log(0.1), 1e-12));

  ScoredPartition ind = log_marginal_likelihood(d, SetPartition::singletons(2), true);
  CHECK_THAT(*ind.full_log_marginal, WithinAbs(std::log(1.0 / 18.0), 1e-12));

  // the dependent model wins here
  CHECK(dep.comparable_log_score > ind.comparable_log_score);

  SetPartition wrong_size = SetPartition::singletons(3);
  CHECK_THROWS_AS(log_marginal_likelihood(d, wrong_size), std::invalid_argument);
}

TEST_CASE("empty dataset scores zero") {
  Dataset d = two_binary_dataset(0, 0, 0, 0);
  REQUIRE(d.sample_count() == 0);
  for (const auto& p : factorbayes::all_partitions(2)) {
    ScoredPartition sp = log_marginal_likelihood(d, p, true);
    CHECK(sp.comparable_log_score == 0.0);
    CHECK(*sp.full_log_marginal == 0.0);
  }
}

TEST_CASE("closed forms agree with the general evaluation") {
  factorbayes::Pcg32 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int64_t n1 = testsupport::rand_int(rng, 0, 50);
    int64_t n2 = testsupport::rand_int(rng, 0, 50);
    int64_t n3 = testsupport::rand_int(rng, 0, 50);
    int64_t n4 = testsupport::rand_int(rng, 0, 50);
    Dataset d = two_binary_dataset(n1, n2, n3, n4);
    auto closed = two_binary_scores(n1, n2, n3, n4);
    auto dep = log_marginal_likelihood(d, SetPartition::one_block(2), true);
    auto ind = log_marginal_likelihood(d, SetPartition::singletons(2), true);
    CHECK_THAT(closed.log_dependent, WithinAbs(*dep.full_log_marginal, 1e-10));
    CHECK_THAT(closed.log_independent, WithinAbs(*ind.full_log_marginal, 1e-10));
  }
}

TEST_CASE("two-binary edge values and the Bayes factor") {
  auto empty = two_binary_scores(0, 0, 0, 0);
  CHECK(empty.log_independent == 0.0);
  CHECK(empty.log_dependent == 0.0);
  CHECK(bayes_factor_two_binary(0, 0, 0, 0) == 1.0);

  auto diag = two_binary_scores(1, 0, 0, 1);
  CHECK_THAT(diag.log_independent, WithinAbs(std::log(1.0 / 18.0), 1e-12));
  CHECK_THAT(diag.log_dependent, WithinAbs(std::log(0.1), 1e-12));
  CHECK_THAT(bayes_factor_two_binary(1, 0, 0, 1), WithinRel(5.0 / 9.0, 1e-12));

  // a perfectly balanced table favors independence
  CHECK(bayes_factor_two_binary(25, 25, 25, 25) > 1.0);

  CHECK_THROWS_AS(two_binary_scores(-1, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("normalization: full scores sum to one over all count vectors") {
  for (int64_t total = 1; total <= 3; ++total) {
    double sum_dep = 0.0, sum_ind = 0.0;
    for (int64_t n1 = 0; n1 <= total; ++n1)
      for (int64_t n2 = 0; n2 <= total - n1; ++n2)
        for (int64_t n3 = 0; n3 <= total - n1 - n2; ++n3) {
          int64_t n4 = total - n1 - n2 - n3;
          Dataset d = two_binary_dataset(n1, n2, n3, n4);
          sum_dep += std::exp(
              *log_marginal_likelihood(d, SetPartition::one_block(2), true).full_log_marginal);
          sum_ind += std::exp(
              *log_marginal_likelihood(d, SetPartition::singletons(2), true).full_log_marginal);
        }
    CHECK_THAT(sum_dep, WithinAbs(1.0, 1e-9));
    CHECK_THAT(sum_ind, WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("integration oracle matches the closed computation") {
  struct Case {
    int64_t n1, n2, n3, n4;
  } cases[] = {{1, 0, 0, 1}, {2, 1, 0, 1}, {0, 0, 0, 4}, {1, 1, 1, 1}};
  for (const auto& c : cases) {
    Dataset d = two_binary_dataset(c.n1, c.n2, c.n3, c.n4);
    double dep = *log_marginal_likelihood(d, SetPartition::one_block(2), true).full_log_marginal;
    double ind = *log_marginal_likelihood(d, SetPartition::singletons(2), true).full_log_marginal;
    CHECK_THAT(std::exp(dep),
               WithinRel(oracle::integrate_two_binary_dependent(c.n1, c.n2, c.n3, c.n4), 1e-4));
    CHECK_THAT(std::exp(ind),
               WithinRel(oracle::integrate_two_binary_independent(c.n1, c.n2, c.n3, c.n4), 1e-4));
  }
}

TEST_CASE("coefficient cancellation and full-score bound") {
  factorbayes::Pcg32 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset d = testsupport::random_dataset(rng, testsupport::rand_int(rng, 2, 5), 3,
                                            testsupport::rand_int(rng, 0, 80));
    SetPartition p = testsupport::random_partition(rng, d.var_count());
    SetPartition q = testsupport::random_partition(rng, d.var_count());
    auto sp = log_marginal_likelihood(d, p, true);
    auto sq = log_marginal_likelihood(d, q, true);
    CHECK_THAT(*sp.full_log_marginal - *sq.full_log_marginal,
               WithinAbs(sp.comparable_log_score - sq.comparable_log_score, 1e-10));
    CHECK(*sp.full_log_marginal <= 1e-12);  // log of a probability
  }
}

TEST_CASE("relabeling a variable's categories leaves scores unchanged") {
  factorbayes::Pcg32 rng(11);
  Dataset d = testsupport::random_dataset(rng, 3, 3, 40);
  // swap categories 0 and 1 of variable 1
  std::vector<factorbayes::VariableSchema> schemas = d.schemas();
  std::swap(schemas[1].categories[0], schemas[1].categories[1]);
  std::vector<uint32_t> cells;
  for (int64_t r = 0; r < d.sample_count(); ++r)
    for (int v = 0; v < d.var_count(); ++v) {
      uint32_t val = d.at(r, v);
      if (v == 1 && val <= 1) val ^= 1u;
      cells.push_back(val);
    }
  Dataset relabeled(schemas, cells);
  for (const auto& p : factorbayes::all_partitions(3)) {
    CHECK_THAT(log_marginal_likelihood(d, p).comparable_log_score,
               WithinAbs(log_marginal_likelihood(relabeled, p).comparable_log_score, 1e-9));
  }
}

TEST_CASE("permuting variables and the partition together leaves scores unchanged") {
  factorbayes::Pcg32 rng(12);
  Dataset d = testsupport::random_dataset(rng, 4, 3, 50);
  std::vector<int> perm{2, 0, 3, 1};  // column v of the new dataset is old perm[v]
  Dataset permuted = d.project(perm);
  for (const auto& p : factorbayes::all_partitions(4)) {
    // push each block through the inverse map so it names the same columns
    std::vector<int> inverse(4);
    for (int v = 0; v < 4; ++v) inverse[perm[v]] = v;
    std::vector<std::vector<int>> blocks;
    for (const auto& b : p.blocks()) {
      std::vector<int> nb;
      for (int v : b) nb.push_back(inverse[v]);
      std::sort(nb.begin(), nb.end());
      blocks.push_back(std::move(nb));
    }
    SetPartition q = factorbayes::canonicalize(blocks);
    CHECK_THAT(log_marginal_likelihood(d, p).comparable_log_score,
               WithinAbs(log_marginal_likelihood(permuted, q).comparable_log_score, 1e-9));
  }
}

TEST_CASE("block scores are local to the block") {
  // change a column outside the block: the block's score must not move
  Dataset d1 = testsupport::dataset_from_csv("a,b,c\n0,x,p\n1,y,q\n0,x,p\n1,x,q\n");
  Dataset d2 = testsupport::dataset_from_csv("a,b,c\n0,x,q\n1,y,q\n0,x,q\n1,x,p\n");
  std::vector<int> ab{0, 1};
  CHECK(block_log_score(d1, ab) == block_log_score(d2, ab));
}

TEST_CASE("sparse and dense tallies agree bit for bit") {
  factorbayes::Pcg32 rng(13);
  Dataset d = testsupport::random_dataset(rng, 4, 3, 60);
  std::vector<int> block{0, 1, 2, 3};
  double dense = factorbayes::detail::block_log_score_impl(d, block, 1.0, int64_t(1) << 20);
  double sparse = factorbayes::detail::block_log_score_impl(d, block, 1.0, 1);
  CHECK(dense == sparse);
}

TEST_CASE("general concentration parameter") {
  // alpha = 2 on counts [1,1]: log B(3,3)/B(2,2) = log((4/120)/(1/6)) = log(1/5)
  Dataset d = two_binary_dataset(0, 1, 1, 0);
  std::vector<int> second{1};
  CHECK_THAT(block_log_score(d, second, 2.0), WithinAbs(std::log(0.2), 1e-12));
  CHECK_THROWS_AS(block_log_score(d, second, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(block_log_score(d, second, -1.0), std::invalid_argument);
}

TEST_CASE("posterior score hooks") {
  Dataset d = two_binary_dataset(3, 1, 2, 4);
  auto sp = log_marginal_likelihood(d, SetPartition::singletons(2));

  CHECK(factorbayes::log_posterior_score(sp) == sp.comparable_log_score);
  CHECK(factorbayes::log_posterior_score(sp, [](const SetPartition&) { return 0.0; }) ==
        sp.comparable_log_score);
  CHECK(factorbayes::log_posterior_score(
            sp, [](const SetPartition& p) { return -double(p.block_count()); }) ==
        sp.comparable_log_score - 2.0);
  CHECK_THROWS_AS(factorbayes::log_posterior_score(
                      sp, [](const SetPartition&) { return std::nan(""); }),
                  std::invalid_argument);

  // a constant prior shift preserves the ordering of any two partitions
  auto sq = log_marginal_likelihood(d, SetPartition::one_block(2));
  auto prior = [](const SetPartition&) { return -3.25; };
  CHECK((factorbayes::log_posterior_score(sp, prior) < factorbayes::log_posterior_score(sq, prior)) ==
        (sp.comparable_log_score < sq.comparable_log_score));
}

TEST_CASE("block score cache") {
  factorbayes::BlockScoreCache cache;
  int evaluations = 0;
  std::vector<int> block{0, 2};
  auto compute = [&](std::span<const int>) {
    ++evaluations;
    return 1.5;
  };
  CHECK(cache.get_or_compute(block, compute) == 1.5);
  CHECK(cache.get_or_compute(block, compute) == 1.5);
  CHECK(evaluations == 1);
  std::vector<int> other{0, 3};
  cache.get_or_compute(other, compute);
  CHECK(evaluations == 2);
  CHECK(cache.size() == 2);
}
