// Writes the synthetic 21-city fixture: corpus, prediction users, economy
// indexes and a pipeline config.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "satislice/corpus.hpp"
#include "satislice/io.hpp"
#include "satislice/time.hpp"

namespace {

using namespace satislice;
using json = nlohmann::ordered_json;
using std::chrono::hours;
using std::chrono::milliseconds;
using std::chrono::seconds;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  bool chance(double p) { return uniform() < p; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kPositive{
    "今天很开心，和朋友一起吃饭。", "哈哈，周末去旅游，好幸福！", "工作顺利，老板给我加工资了。",
    "和家人一起看电影，真好。",     "happy weekend with my friends!", "终于成功了，努力没有白费！",
    "喜欢这首音乐，感觉很温暖。",   "给力！我们赢了 3 场比赛。"};
const std::vector<std::string> kNegative{
    "工作太累了，又要加班。",     "房价太高，工资不够，好烦！", "今天很难过，不想说话……",
    "为什么物价一直涨？",         "担心明天的考试，好紧张。",   "气死了，老板又骂人。",
    "so tired of work, really sad.", "生病了，去医院排队两个小时。"};
const std::vector<std::string> kNeutral{
    "我们明天去上班。",        "下午三点开会：讨论工作。", "看新闻（关于经济）",
    "@朋友 你们在哪里？",      "#话题# 今天天气不错 [太阳]", "http://t.cn/abc 分享视频",
    "2012年有3个人来我家。",   "嗯，好的，然后再说吧。",   "现在在路上，马上到。"};

struct CityPlan {
  std::string name;
  double effect;  // shifts the satisfaction of everyone in the city
};

// How a planted user deviates from a regular labeled participant.
enum class Plant { none, too_few, inactive, too_fast, incomplete, prediction_only };

const Timestamp kAsOf = parse_timestamp("2013-03-01T00:00:00Z");

json make_user(Rng& rng, const std::string& id, const CityPlan& city, Plant plant, double latent) {
  const double mood = std::clamp(latent + city.effect, -1.0, 1.0);
  json u;
  u["user_id"] = id;
  u["city"] = city.name;
  const bool male = rng.chance(0.55);
  u["gender"] = male ? "male" : "female";
  const int age = 18 + static_cast<int>(rng.below(14));
  u["age"] = age;

  const Timestamp first = parse_timestamp("2011-09-01T00:00:00Z") +
                          std::chrono::duration_cast<milliseconds>(hours{24 * static_cast<int>(rng.below(300))});
  Timestamp last = kAsOf - std::chrono::duration_cast<milliseconds>(hours{24 + 24 * static_cast<int>(rng.below(30))});
  if (plant == Plant::inactive) last = kAsOf - days(91);
  u["registered_at"] = format_timestamp(first - days(10 + static_cast<long long>(rng.below(200))));

  json profile;
  profile["gender"] = male ? "m" : "f";
  profile["age"] = age;
  profile["hometown"] = rng.chance(0.7) ? city.name : "";
  profile["verified"] = rng.chance(0.1);
  profile["screen_name"] = "u" + id;
  profile["avatar"] = rng.chance(0.85) ? "http://tp.example/" + id + ".jpg" : "";
  profile["description"] = rng.chance(0.5 + 0.3 * mood) ? "生活就是这样" : "";
  profile["domain"] = rng.chance(0.3) ? id : "";
  profile["url"] = rng.chance(0.2) ? "http://blog.example/" + id : "";
  profile["tags"] = json::array();
  for (std::size_t t = rng.below(6); t > 0; --t) profile["tags"].push_back("tag" + std::to_string(t));
  profile["education"] = rng.chance(0.6) ? json::array({"university"}) : json::array();
  profile["career"] = rng.chance(0.4 + 0.2 * mood) ? json::array({"company"}) : json::array();
  profile["birthday"] = rng.chance(0.5) ? "1990-01-01" : "";
  profile["email"] = rng.chance(0.3) ? id + "@mail.example" : "";
  profile["qq"] = rng.chance(0.4) ? "10000" + std::to_string(rng.below(90000)) : "";
  if (rng.chance(0.7)) profile["msn"] = "";
  profile["allow_all_comment"] = rng.chance(0.8);
  profile["allow_all_act_msg"] = rng.chance(0.5);
  profile["geo_enabled"] = rng.chance(0.4);
  profile["friends_count"] = 50 + static_cast<int>(rng.below(600));
  profile["followers_count"] = static_cast<int>(std::max(0.0, 200 + 150 * mood + 120 * rng.normal()));
  profile["bi_followers_count"] = static_cast<int>(rng.below(200));
  profile["favourites_count"] = static_cast<int>(rng.below(300));
  u["profile"] = std::move(profile);

  const std::size_t n = plant == Plant::too_few ? 499 : 520 + rng.below(60);
  std::vector<Timestamp> times;
  const double span = static_cast<double>((last - first).count());
  for (std::size_t i = 0; i < n; ++i) times.push_back(first + milliseconds{static_cast<long long>(rng.uniform() * span) / 1000 * 1000});
  times.back() = last;
  std::sort(times.begin(), times.end());
  json statuses = json::array();
  for (Timestamp t : times) {
    const double r = rng.uniform();
    const double p_pos = 0.25 + 0.2 * mood;
    const double p_neg = 0.25 - 0.2 * mood;
    const auto& pool = r < p_pos ? kPositive : r < p_pos + p_neg ? kNegative : kNeutral;
    const bool repost = rng.chance(0.2);
    std::string text = pool[rng.below(pool.size())];
    if (repost) text = "转发微博 //" + text;
    statuses.push_back({{"posted_at", format_timestamp(t)}, {"text", text}, {"is_repost", repost}});
  }
  u["statuses"] = std::move(statuses);

  json answers = json::array();
  if (plant != Plant::prediction_only) {
    // Loadings of each question's dimension on the latent mood and the city effect.
    constexpr std::array<int, 13> kDim{0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
    constexpr std::array<double, 6> kMood{1.2, 1.0, 0.8, 0.5, 0.6, 0.7};
    constexpr std::array<double, 6> kCity{0.4, 0.5, 0.3, 0.2, 1.5, 0.6};
    std::array<int, 13> order{};
    for (int q = 0; q < 13; ++q) order[q] = q + 1;
    std::shuffle(order.begin(), order.end(), std::mt19937_64(rng.below(1u << 30)));
    Timestamp at = parse_timestamp("2013-02-20T12:00:00+08:00") + hours{static_cast<int>(rng.below(24 * 30))};
    const int count = plant == Plant::incomplete ? 12 : 13;
    for (int i = 0; i < count; ++i) {
      const int q = order[i];
      const int d = kDim[q - 1];
      const double raw = 3 + 1.4 * (kMood[d] * latent + kCity[d] * city.effect) + 0.6 * rng.normal();
      const int score = std::clamp(static_cast<int>(std::lround(raw)), kMinScore, kMaxScore);
      answers.push_back({{"question_id", q}, {"score", score}, {"submitted_at", format_timestamp(at)}});
      Duration gap = rng.chance(0.1) ? Duration{2000} : Duration{2000 + static_cast<long long>(rng.below(8000))};
      if (plant == Plant::too_fast && i == 5) gap = Duration{1900};
      at += gap;
    }
  }
  u["answers"] = std::move(answers);
  return u;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic fixture generator"};
  std::string out = "data/fixture";
  std::uint64_t seed = 20130301;
  std::size_t per_city = 3;
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--per-city", per_city, "labeled users per city");
  CLI11_PARSE(app, argc, argv);

  Rng rng(seed);
  const CityTable cities = CityTable::load(std::filesystem::path(out) / ".." / "cities.csv");
  std::vector<CityPlan> plans;
  for (const auto& e : cities.entries()) plans.push_back({e.city, rng.uniform(-0.4, 0.4)});

  // Planted violations, by city position.
  const std::vector<std::pair<std::size_t, Plant>> planted{
      {0, Plant::too_few},         {1, Plant::too_few},         {2, Plant::inactive},
      {3, Plant::inactive},        {4, Plant::too_fast},        {5, Plant::too_fast},
      {6, Plant::incomplete},      {7, Plant::prediction_only}, {8, Plant::prediction_only},
      {9, Plant::prediction_only}};

  std::string corpus;
  for (std::size_t c = 0; c < plans.size(); ++c) {
    for (std::size_t i = 0; i < per_city; ++i) {
      const std::string id = plans[c].name + "_" + std::to_string(i + 1);
      corpus += make_user(rng, id, plans[c], Plant::none, rng.uniform(-0.6, 0.6)).dump() + "\n";
    }
    for (const auto& [city, plant] : planted) {
      if (city != c) continue;
      const std::string id = plans[c].name + "_x";
      corpus += make_user(rng, id, plans[c], plant, rng.uniform(-0.6, 0.6)).dump() + "\n";
    }
  }
  write_file(std::filesystem::path(out) / "corpus.jsonl", corpus);

  std::string predict;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& city = plans[10 + i];
    predict += make_user(rng, "new_" + std::to_string(i + 1), city, Plant::prediction_only, rng.uniform(-0.6, 0.6))
                   .dump() +
               "\n";
  }
  write_file(std::filesystem::path(out) / "predict_users.jsonl", predict);

  // Index rows: a base level per city plus, for some rows, a share of the city effect.
  const std::vector<std::pair<std::string, double>> indexes{
      {"Gross Domestic Product (GDP)", 0.0},
      {"Growth Rates of GDP", 0.3},
      {"Per Capita GDP", 0.9},
      {"Gross Output Value of Agriculture", 0.7},
      {"Output of Grain", 0.5},
      {"Output of Rice", 0.5},
      {"Output of Sugarcane", 0.3},
      {"Output of Peanut", 0.5},
      {"Output of Vegetable", 0.7},
      {"Number of Hogs on Hand at the Year-end", 0.7},
      {"Slaughtered Fattened Hogs", 0.7},
      {"Output of Pork", 0.7},
      {"Total Retail Sales of Consumer Goods", 0.5},
      {"Total Retail Sales of Wholesale and Retail Trades", 0.5},
      {"Number of Fully Employed Staff and Workers", 0.1},
      {"Total Wages of Fully Employed Staff and Workers", 0.0},
      {"Average Wage of Fully Employed Staff and Workers", 0.5}};
  std::string csv = "index";
  for (const auto& p : plans) csv += "," + p.name;
  csv += "\n";
  for (const auto& [name, loading] : indexes) {
    const double base = rng.uniform(50, 500);
    csv += csv_field(name);
    for (const auto& p : plans) {
      const double z = loading * p.effect / 0.23 + std::sqrt(1 - loading * loading) * rng.normal();
      csv += "," + format_fixed(base * (1.0 + 0.25 * z), 2);
    }
    csv += "\n";
  }
  write_file(std::filesystem::path(out) / "economy_indexes.csv", csv);

  json config;
  config["corpus"] = "corpus.jsonl";
  config["lexicon"] = "../lexicon_demo.csv";
  config["dimension_map"] = "../dimension_map.json";
  config["city_table"] = "../cities.csv";
  config["index_table"] = "economy_indexes.csv";
  config["output_dir"] = "out";
  config["as_of"] = format_timestamp(kAsOf);
  config["grid"] = {{"start", "2012-02"}, {"count", 13}};
  config["filter"] = {{"min_statuses", 500}, {"recency_days", 90}, {"min_response_seconds", 2}};
  config["tokenizer"] = "max_match";
  config["include_reposts"] = true;
  config["models"] = {"ols", "ridge", "m5p"};
  config["lambda"] = {0.1, 1.0, 10.0, 100.0};
  config["m5p"] = {{"min_leaf", 4}, {"smoothing", true}};
  config["standardize"] = true;
  config["clamp"] = false;
  config["folds"] = 10;
  config["seed"] = 42;
  config["regional_model"] = "m5p";
  write_file(std::filesystem::path(out) / "config.json", config.dump(2) + "\n");
  std::cout << "wrote fixture to " << out << "\n";
  return 0;
}
