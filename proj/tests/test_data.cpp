#include <filesystem>
#include <set>

#include "doctest.h"

#include "ck/data.hpp"
#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/rng.hpp"
#include "test_helpers.hpp"

using namespace ck;

namespace {

Schema toy_schema() {
  Schema s;
  s.alternatives = {"car", "bus"};
  s.attributes = {"cost"};
  s.covariates = {"female"};
  return s;
}

// N individuals with T observations each, deterministic contents.
ChoiceDataset toy_dataset(int n, int t) {
  ChoiceDataset ds;
  ds.schema = toy_schema();
  Rng rng(99);
  for (int i = 0; i < n; ++i) {
    Individual ind;
    ind.id = "id" + std::to_string(i + 1);
    ind.covariates = {static_cast<double>(i % 2)};
    for (int k = 0; k < t; ++k) {
      Observation o;
      o.task = k + 1;
      o.avail = {1, 1};
      o.attrs = {rng.uniform(0, 5), rng.uniform(0, 5)};
      o.chosen = static_cast<int>(rng.below(2));
      ind.obs.push_back(o);
    }
    ds.individuals.push_back(ind);
  }
  return ds;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("toy csv loads into the expected shape") {
  const auto dir = ckt::temp_dir("data_load");
  const std::string path = dir + "/toy.csv";
  write_text_file(path,
                  "indiv_id,task,choice,avail_car,avail_bus,cost_car,cost_bus,female\n"
                  "p1,1,car,1,1,1.5,2.0,0\n"
                  "p1,2,bus,1,1,1.0,0.5,0\n"
                  "p2,1,bus,1,1,2.5,1.0,1\n"
                  "p2,2,car,1,1,0.5,3.0,1\n");
  const auto ds = load_dataset(path, toy_schema());
  CHECK(ds.n_individuals() == 2);
  CHECK(ds.n_obs() == 4);
  REQUIRE(ds.individuals[0].obs.size() == 2);
  CHECK(ds.individuals[0].obs[1].chosen == 1);
  CHECK(ds.individuals[1].covariates[0] == 1.0);
  CHECK(ds.individuals[1].obs[0].attrs[1] == 1.0);  // cost_bus
}

TEST_CASE("write then load round-trips field by field") {
  const auto dir = ckt::temp_dir("data_roundtrip");
  const auto ds = toy_dataset(7, 3);
  write_dataset(ds, dir + "/d.csv");
  const auto back = load_dataset(dir + "/d.csv", ds.schema);
  REQUIRE(back.n_individuals() == ds.n_individuals());
  for (std::size_t i = 0; i < ds.individuals.size(); ++i) {
    CHECK(back.individuals[i].id == ds.individuals[i].id);
    CHECK(back.individuals[i].covariates == ds.individuals[i].covariates);
    REQUIRE(back.individuals[i].obs.size() == ds.individuals[i].obs.size());
    for (std::size_t t = 0; t < ds.individuals[i].obs.size(); ++t) {
      CHECK(back.individuals[i].obs[t].task == ds.individuals[i].obs[t].task);
      CHECK(back.individuals[i].obs[t].chosen == ds.individuals[i].obs[t].chosen);
      CHECK(back.individuals[i].obs[t].avail == ds.individuals[i].obs[t].avail);
      CHECK(back.individuals[i].obs[t].attrs == ds.individuals[i].obs[t].attrs);
    }
  }
}

TEST_CASE("chosen but unavailable is rejected") {
  const auto dir = ckt::temp_dir("data_avail");
  const std::string path = dir + "/bad.csv";
  write_text_file(path,
                  "indiv_id,task,choice,avail_car,avail_bus,cost_car,cost_bus,female\n"
                  "p1,1,bus,1,0,1.5,2.0,0\n");
  CHECK_THROWS_WITH_AS(load_dataset(path, toy_schema()),
                       doctest::Contains("chosen alternative unavailable"), ConfigError);
}

TEST_CASE("missing column and duplicate keys are rejected") {
  const auto dir = ckt::temp_dir("data_missing");
  write_text_file(dir + "/m.csv",
                  "indiv_id,task,choice,avail_car,avail_bus,cost_car,female\n"
                  "p1,1,car,1,1,1.5,0\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir + "/m.csv", toy_schema()),
                       doctest::Contains("missing column 'cost_bus'"), ConfigError);

  write_text_file(dir + "/dup.csv",
                  "indiv_id,task,choice,avail_car,avail_bus,cost_car,cost_bus,female\n"
                  "p1,1,car,1,1,1.5,2.0,0\n"
                  "p1,1,bus,1,1,1.5,2.0,0\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir + "/dup.csv", toy_schema()),
                       doctest::Contains("duplicate (individual, task)"), ConfigError);

  write_text_file(dir + "/nan.csv",
                  "indiv_id,task,choice,avail_car,avail_bus,cost_car,cost_bus,female\n"
                  "p1,1,car,1,1,oops,2.0,0\n");
  CHECK_THROWS_AS(load_dataset(dir + "/nan.csv", toy_schema()), ConfigError);
}

TEST_CASE("split reproduces the 2147x6 holdout arithmetic") {
  const auto ds = toy_dataset(2147, 6);
  const auto split = split_dataset(ds, 0.2, 12345);
  CHECK(split.estimation.n_individuals() == 1718);
  CHECK(split.estimation.n_obs() == 8590);
  CHECK(split.new_individuals.n_individuals() == 429);
  CHECK(split.new_individuals.n_obs() == 2574);
  CHECK(split.last_choices.n_individuals() == 1718);
  CHECK(split.last_choices.n_obs() == 1718);
}

TEST_CASE("split is a partition with the final task held out") {
  const auto ds = toy_dataset(53, 4);
  const auto split = split_dataset(ds, 0.25, 7);
  CHECK(split.estimation.n_obs() + split.last_choices.n_obs() +
            split.new_individuals.n_obs() ==
        ds.n_obs());
  std::set<std::string> est_ids, new_ids;
  for (const auto& i : split.estimation.individuals) est_ids.insert(i.id);
  for (const auto& i : split.new_individuals.individuals) new_ids.insert(i.id);
  for (const auto& id : est_ids) CHECK(new_ids.count(id) == 0);
  for (const auto& ind : split.estimation.individuals) {
    const int orig = ds.find_individual(ind.id);
    CHECK(ind.obs.size() == ds.individuals[orig].obs.size() - 1);
    const int li = split.last_choices.find_individual(ind.id);
    REQUIRE(li >= 0);
    // the held-out observation carries the maximal task index
    CHECK(split.last_choices.individuals[li].obs[0].task ==
          ds.individuals[orig].obs.back().task);
    for (const auto& o : ind.obs)
      CHECK(o.task < split.last_choices.individuals[li].obs[0].task);
  }
}

TEST_CASE("split determinism and edge cases") {
  const auto ds = toy_dataset(40, 3);
  const auto s1 = split_dataset(ds, 0.3, 11);
  const auto s2 = split_dataset(ds, 0.3, 11);
  REQUIRE(s1.estimation.n_individuals() == s2.estimation.n_individuals());
  for (std::size_t i = 0; i < s1.estimation.individuals.size(); ++i)
    CHECK(s1.estimation.individuals[i].id == s2.estimation.individuals[i].id);

  // single individual, tiny holdout fraction: retained with T-1/1 split
  const auto one = toy_dataset(1, 5);
  const auto s3 = split_dataset(one, 1e-9, 1);
  CHECK(s3.estimation.n_individuals() == 1);
  CHECK(s3.estimation.n_obs() == 4);
  CHECK(s3.last_choices.n_obs() == 1);
  CHECK(s3.new_individuals.n_individuals() == 0);

  auto bad = toy_dataset(3, 1);
  CHECK_THROWS_WITH_AS(split_dataset(bad, 0.2, 1), doctest::Contains("single observation"),
                       ConfigError);
  CHECK_THROWS_AS(split_dataset(ds, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(ds, 1.0, 1), ConfigError);
}

TEST_CASE("observed shares: counting oracle") {
  // fixed count vector over 1000 observations
  const std::vector<int> counts = {475, 142, 50, 34, 34, 265};
  ChoiceDataset ds;
  ds.schema.alternatives = {"car", "bus", "rail", "taxi", "cycle", "walk"};
  int id = 0;
  for (std::size_t j = 0; j < counts.size(); ++j)
    for (int k = 0; k < counts[j]; ++k) {
      Individual ind;
      ind.id = "i" + std::to_string(++id);
      Observation o;
      o.task = 1;
      o.avail.assign(6, 1);
      o.chosen = static_cast<int>(j);
      ind.obs.push_back(o);
      ds.individuals.push_back(ind);
    }
  const auto shares = observed_shares(ds);
  const std::vector<double> expect = {0.475, 0.142, 0.05, 0.034, 0.034, 0.265};
  for (std::size_t j = 0; j < expect.size(); ++j)
    CHECK(shares[j] == doctest::Approx(expect[j]).epsilon(1e-12));

  double total = 0.0;
  for (double s : shares) total += s;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("observed shares: degenerate and random datasets sum to one") {
  auto all_one = ckt::binary_dataset(5, 0);
  const auto s = observed_shares(all_one);
  CHECK(s[1] == 1.0);
  CHECK(s[0] == 0.0);

  const auto ds = toy_dataset(31, 2);
  const auto r = observed_shares(ds);
  double total = 0.0;
  for (double v : r) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
