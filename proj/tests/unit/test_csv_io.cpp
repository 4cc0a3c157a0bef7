#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace jointrait;

namespace {

void write_minimal(const fixtures::TempDir& dir, const std::string& survival, const std::string& longitudinal) {
  write_text_file(dir.file("survival.csv"), survival);
  write_text_file(dir.file("covariates.csv"), "id,x1,x2\na,1,50\nb,0,61\n");
  write_text_file(dir.file("longitudinal.csv"), longitudinal);
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(CsvIo, DatasetRoundTrip) {
  auto sc = SimScenario::standard();
  sc.n = 50;
  const auto sim = generate_dataset(sc);
  const auto spec = SimScenario::model_spec();
  fixtures::TempDir dir;
  write_dataset(dir.path(), sim.data, spec);
  const auto back = read_dataset(dir.path(), spec);
  ASSERT_EQ(back.subjects.size(), sim.data.subjects.size());
  for (std::size_t i = 0; i < back.subjects.size(); ++i) {
    const auto& a = sim.data.subjects[i];
    const auto& b = back.subjects[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.observed_time, b.observed_time);
    EXPECT_EQ(a.event, b.event);
    EXPECT_EQ(a.covariates, b.covariates);
    ASSERT_EQ(a.visits.size(), b.visits.size());
    for (std::size_t j = 0; j < a.visits.size(); ++j) {
      EXPECT_EQ(a.visits[j].time, b.visits[j].time);
      EXPECT_EQ(a.visits[j].values, b.visits[j].values);
    }
  }
}

TEST(CsvIo, MissingValuesAndRowOrder) {
  fixtures::TempDir dir;
  write_minimal(dir, "id,time,event\na,10,1\nb,8,0\n",
                "id,time,outcome,value\n"
                "a,3,y1,20\na,0,y1,NA\na,0,y2,2\nb,0,y3,\na,3,y3,4\n");
  const auto d = read_dataset(dir.path(), SimScenario::model_spec());
  ASSERT_EQ(d.subjects.size(), 2u);
  const auto& a = d.subjects[0];
  ASSERT_EQ(a.visits.size(), 2u);
  EXPECT_EQ(a.visits[0].time, 0.0);
  EXPECT_FALSE(a.visits[0].values[0].has_value());
  EXPECT_EQ(a.visits[0].values[1], 2.0);
  EXPECT_EQ(a.visits[1].values[0], 20.0);
  EXPECT_EQ(a.visits[1].values[2], 4.0);
  ASSERT_EQ(d.subjects[1].visits.size(), 1u);
  EXPECT_FALSE(d.subjects[1].visits[0].values[2].has_value());
}

TEST(CsvIo, ErrorsNameTheField) {
  const auto spec = SimScenario::model_spec();
  fixtures::TempDir dir;
  write_minimal(dir, "id,time,event\na,10,1\nb,8,2\n", "id,time,outcome,value\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "survival.csv:3.event");

  write_minimal(dir, "id,time,event\na,10,1\nb,8,0\n", "id,time,outcome,value\na,0,y9,1\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "longitudinal.csv:2.outcome");

  write_minimal(dir, "id,time,event\na,10,1\nb,8,0\n", "id,time,outcome,value\nzz,0,y1,1\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "longitudinal.csv:2.id");

  write_minimal(dir, "id,time,event\na,10,1\nb,8,0\n", "id,time,outcome,value\na,0,y2,9\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "subjects[a].visits[0].outcomes.y2");

  write_minimal(dir, "id,time,event\na,10,1\nb,8,0\n", "id,time,outcome,value\na,12,y1,1\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "subjects[a].visits[0].time");

  write_minimal(dir, "id,time,event\na,ten,1\n", "id,time,outcome,value\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "survival.csv:2.time");

  write_minimal(dir, "id,time,event\na,10,1\na,8,0\n", "id,time,outcome,value\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), spec); }), "survival.csv:3.id");
}

TEST(CsvIo, CovariatesFileRequiredWhenDesignUsesCovariates) {
  fixtures::TempDir dir;
  write_text_file(dir.file("survival.csv"), "id,time,event\na,10,1\n");
  write_text_file(dir.file("longitudinal.csv"), "id,time,outcome,value\n");
  EXPECT_EQ(field_of([&] { read_dataset(dir.path(), SimScenario::model_spec()); }), "covariates.csv");
}

TEST(CsvIo, PredictionsRoundTrip) {
  const std::vector<EvalRecord> recs{{"a", 0.125, 7.5, 1}, {"b,c", 1.0 / 3.0, 30, 0}};
  fixtures::TempDir dir;
  write_predictions(dir.file("p.csv"), recs);
  const auto back = read_predictions(dir.file("p.csv"));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, recs[i].id);
    EXPECT_EQ(back[i].risk, recs[i].risk);
    EXPECT_EQ(back[i].time, recs[i].time);
    EXPECT_EQ(back[i].event, recs[i].event);
  }
}

TEST(CsvIo, FormatDoubleIsShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(24.0), "24");
  EXPECT_EQ(format_double(std::nan("")), "NaN");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-Inf");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(x)), x);
}
