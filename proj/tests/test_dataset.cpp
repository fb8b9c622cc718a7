#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "factorbayes/dataset.hpp"
#include "test_support.hpp"

using factorbayes::CsvOptions;
using factorbayes::Dataset;
using factorbayes::GroupCounts;
using factorbayes::MissingPolicy;
using factorbayes::VariableSchema;
using factorbayes::group_counts;
using factorbayes::load_csv;
using testsupport::dataset_from_csv;

TEST_CASE("basic CSV loading infers schemas in first-appearance order") {
  Dataset d = dataset_from_csv("a,b\n0,x\n1,y\n0,y\n");
  CHECK(d.var_count() == 2);
  CHECK(d.sample_count() == 3);
  CHECK(d.schema(0).name == "a");
  CHECK(d.schema(0).cardinality() == 2);
  CHECK(d.schema(1).categories == std::vector<std::string>{"x", "y"});
  CHECK(d.at(0, 1) == 0);
  CHECK(d.at(1, 1) == 1);
  CHECK(d.var_index("b") == 1);
  CHECK(d.var_index("nope") == -1);

  Dataset no_header = dataset_from_csv("0,x\n1,y\n", {.header = false});
  CHECK(no_header.schema(0).name == "x1");
  CHECK(no_header.schema(1).name == "x2");
  CHECK(no_header.sample_count() == 2);
}

TEST_CASE("missing cells follow the policy") {
  std::string text = "a,b\n0,x\n1,\n0,y\n";
  CHECK_THROWS_WITH(dataset_from_csv(text),
                    Catch::Matchers::ContainsSubstring("row 2") &&
                        Catch::Matchers::ContainsSubstring("'b'"));

  Dataset dropped = dataset_from_csv(text, {.missing = MissingPolicy::Drop});
  CHECK(dropped.sample_count() == 2);
  CHECK(dropped.schema(1).categories == std::vector<std::string>{"x", "y"});

  Dataset with_cat = dataset_from_csv(text, {.missing = MissingPolicy::Category});
  CHECK(with_cat.sample_count() == 3);
  CHECK(with_cat.schema(1).categories == std::vector<std::string>{"x", "", "y"});
}

TEST_CASE("RFC 4180 quoting") {
  Dataset d = dataset_from_csv("a,b\n\"x,1\",\"say \"\"hi\"\"\"\r\nplain,\"multi\nline\"\n");
  CHECK(d.sample_count() == 2);
  CHECK(d.schema(0).categories == std::vector<std::string>{"x,1", "plain"});
  CHECK(d.schema(1).categories == std::vector<std::string>{"say \"hi\"", "multi\nline"});

  // write_csv round-trips oddball labels
  std::ostringstream out;
  factorbayes::write_csv(d, out);
  Dataset again = dataset_from_csv(out.str());
  CHECK(again == d);
}

TEST_CASE("CSV error cases") {
  CHECK_THROWS_AS(dataset_from_csv(""), std::runtime_error);
  CHECK_THROWS_AS(dataset_from_csv("a,b\n0\n"), std::runtime_error);        // ragged
  CHECK_THROWS_AS(dataset_from_csv("a,b\n\"x,1\n"), std::runtime_error);    // open quote
  CHECK_THROWS_AS(dataset_from_csv("a,a\n0,1\n"), std::runtime_error);      // dup names
  CHECK_THROWS_AS(dataset_from_csv("a,b\n0,x\n", {.label_column = "nope"}),
                  std::runtime_error);
  CHECK_NOTHROW(dataset_from_csv("a,b\n0,x\n", {.label_column = "b"}));
}

TEST_CASE("header-only file loads as a zero-row dataset") {
  Dataset d = dataset_from_csv("a,b,c\n");
  CHECK(d.sample_count() == 0);
  CHECK(d.var_count() == 3);
  for (int v = 0; v < 3; ++v) CHECK(d.schema(v).cardinality() == 1);
}

TEST_CASE("encode/decode round trip") {
  std::string text = "color,size\nred,small\ngreen,large\nred,large\nblue,small\n";
  Dataset d = dataset_from_csv(text);
  std::vector<std::vector<std::string>> raw{{"red", "small"},
                                            {"green", "large"},
                                            {"red", "large"},
                                            {"blue", "small"}};
  for (int64_t r = 0; r < d.sample_count(); ++r) CHECK(d.decode_row(r) == raw[r]);
}

TEST_CASE("dataset constructor validation") {
  std::vector<VariableSchema> schemas{{"a", {"0", "1"}}};
  CHECK_THROWS_AS(Dataset(schemas, {2}), std::out_of_range);
  CHECK_THROWS_AS(Dataset({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Dataset({{"a", {}}}, {}), std::invalid_argument);          // no categories
  CHECK_THROWS_AS(Dataset({{"a", {"0", "0"}}}, {}), std::invalid_argument);  // dup category
  std::vector<VariableSchema> two{{"a", {"0", "1"}}, {"b", {"0", "1"}}};
  CHECK_THROWS_AS(Dataset(two, {0, 1, 0}), std::invalid_argument);  // ragged cells
  CHECK_NOTHROW(Dataset(two, {}));                                  // zero rows is fine
}

TEST_CASE("group counts tally in mixed-radix order") {
  // rows {(0,0),(0,1),(1,1)} over two binary vars
  Dataset d = testsupport::two_binary_dataset(1, 1, 0, 1);
  std::vector<int> both{0, 1};
  GroupCounts g = group_counts(d, both);
  CHECK(g.counts == std::vector<int64_t>{1, 1, 0, 1});
  CHECK(g.total == 3);
  std::vector<int> first{0};
  CHECK(group_counts(d, first).counts == std::vector<int64_t>{2, 1});

  std::vector<int> empty;
  CHECK_THROWS_AS(group_counts(d, empty), std::invalid_argument);
  std::vector<int> dup{0, 0};
  CHECK_THROWS_AS(group_counts(d, dup), std::invalid_argument);
  std::vector<int> unsorted{1, 0};
  CHECK_THROWS_AS(group_counts(d, unsorted), std::invalid_argument);
  std::vector<int> oob{0, 7};
  CHECK_THROWS_AS(group_counts(d, oob), std::out_of_range);
}

TEST_CASE("bin order over four binary variables reads as a binary string") {
  // one row per joint combination; bin index must equal the binary reading
  std::vector<VariableSchema> schemas;
  for (int v = 0; v < 4; ++v) schemas.push_back({"x" + std::to_string(v + 1), {"0", "1"}});
  std::vector<uint32_t> cells;
  for (uint32_t i = 0; i < 16; ++i)
    for (int v = 0; v < 4; ++v) cells.push_back((i >> (3 - v)) & 1u);
  Dataset d(schemas, cells);

  std::vector<int> all{0, 1, 2, 3};
  GroupCounts g = group_counts(d, all);
  CHECK(g.counts == std::vector<int64_t>(16, 1));
  std::vector<int> pair{0, 1};
  GroupCounts gp = group_counts(d, pair);
  CHECK(gp.counts == std::vector<int64_t>{4, 4, 4, 4});
  // the (1,0) combination of (x1,x2) lands in bin 0b10 = 2
  std::vector<uint32_t> row{1, 0, 0, 0};
  CHECK(factorbayes::block_bin(row, pair, schemas) == 2);
}

TEST_CASE("marginal consistency and totals on random datasets") {
  factorbayes::Pcg32 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset d = testsupport::random_dataset(rng, testsupport::rand_int(rng, 2, 5), 3,
                                            testsupport::rand_int(rng, 1, 60));
    // any block sums to the sample count
    std::vector<int> block{0};
    CHECK(group_counts(d, block).total == d.sample_count());

    if (d.var_count() >= 2) {
      // counts over {0,1} marginalized over var 1 equal counts over {0}
      std::vector<int> ab{0, 1};
      GroupCounts joint = group_counts(d, ab);
      GroupCounts a = group_counts(d, block);
      int card_b = d.schema(1).cardinality();
      for (int va = 0; va < d.schema(0).cardinality(); ++va) {
        int64_t sum = 0;
        for (int vb = 0; vb < card_b; ++vb) sum += joint.counts[va * card_b + vb];
        CHECK(sum == a.counts[va]);
      }
    }
  }
}

TEST_CASE("project and take_rows") {
  Dataset d = dataset_from_csv("a,b,c\n0,x,p\n1,y,q\n0,x,q\n");
  std::vector<int> cols{2, 0};
  Dataset proj = d.project(cols);
  CHECK(proj.var_count() == 2);
  CHECK(proj.schema(0).name == "c");
  CHECK(proj.at(1, 0) == 1);

  std::vector<int64_t> rows{2, 0};
  Dataset taken = d.take_rows(rows);
  CHECK(taken.sample_count() == 2);
  CHECK(taken.decode_row(0) == std::vector<std::string>{"0", "x", "q"});

  std::vector<int> bad{5};
  CHECK_THROWS_AS(d.project(bad), std::out_of_range);
  std::vector<int64_t> badrow{9};
  CHECK_THROWS_AS(d.take_rows(badrow), std::out_of_range);
}

TEST_CASE("cardinality-one columns are allowed") {
  Dataset d = dataset_from_csv("a,b\nk,0\nk,1\n");
  CHECK(d.schema(0).cardinality() == 1);
  std::vector<int> block{0};
  CHECK(group_counts(d, block).counts == std::vector<int64_t>{2});
}
