// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/synth.hpp"

#include <algorithm>
#include <sstream>

#include "itrack/errors.hpp"
#include "itrack/rng.hpp"

namespace itrack {

namespace {

const std::vector<std::string> kPrices = {"cheap", "moderate", "expensive"};
const std::vector<std::string> kAreas = {"north", "south", "east", "west", "centre"};
const std::vector<std::string> kFoods = {"italian", "chinese", "indian", "thai",
                                         "french", "korean", "spanish", "turkish"};
const std::vector<std::string> kNames = {"panahar", "graffiti", "cotto",
                                         "meghna", "nirala", "gardenia"};

// Goal slots the grammar talks about, by kGoalSlotNames index.
constexpr std::size_t kPrice = 0;
constexpr std::size_t kArea = 1;
constexpr std::size_t kName = 2;
constexpr std::size_t kFood = 3;

using Words = std::vector<std::string>;

Words& operator+=(Words& lhs, const Words& rhs) {
  lhs.insert(lhs.end(), rhs.begin(), rhs.end());
  return lhs;
}

std::string join(const Words& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

// Constraint fragment for one goal slot. The value's surface form appears as
// a single token so its position stays recoverable. `leading` picks phrasing
// that works directly after "im looking for".
Words constraint_fragment(std::size_t slot, const std::string& value, bool leading,
                          Rng& rng) {
  if (value == "dontcare") {
    switch (slot) {
      case kPrice: return {"any", "price"};
      case kArea: return {"any", "part", "of", "town"};
      case kFood: return {"any", "kind", "of", "food"};
      default: break;
    }
    throw ValueError("dontcare fragment for unsupported slot");
  }
  switch (slot) {
    case kPrice:
      if (leading) {
        return rng.uniform() < 0.5 ? Words{"a", value, "restaurant"}
                                   : Words{"something", value};
      }
      return rng.uniform() < 0.5 ? Words{"thats", value} : Words{"something", value};
    case kArea: return rng.uniform() < 0.5 ? Words{"in", "the", value}
                                           : Words{"in", "the", value, "part", "of", "town"};
    case kFood: return rng.uniform() < 0.5 ? Words{"serving", value, "food"}
                                           : Words{value, "food"};
    default: break;
  }
  throw ValueError("constraint fragment for unsupported slot");
}

// Short-turn answer to a system question about one goal slot.
Words answer_fragment(std::size_t slot, const std::string& value, Rng& rng) {
  if (value == "dontcare") return constraint_fragment(slot, value, false, rng);
  switch (slot) {
    case kPrice: return rng.uniform() < 0.5 ? Words{value} : Words{value, "please"};
    case kArea: return rng.uniform() < 0.5 ? Words{"in", "the", value} : Words{value};
    case kFood: return rng.uniform() < 0.5 ? Words{value, "food"} : Words{value};
    default: break;
  }
  throw ValueError("answer fragment for unsupported slot");
}

const char* ask_line(std::size_t slot) {
  switch (slot) {
    case kPrice: return "what price range";
    case kArea: return "which part of town";
    case kFood: return "what kind of food";
    default: break;
  }
  throw ValueError("ask line for unsupported slot");
}

struct Builder {
  Dialog dialog;
  TurnAnnotation state;  // running gold state, copied into each turn
  double noise = 0.0;
  Rng* rng = nullptr;

  void add_turn(const std::string& system, const Words& user,
                std::vector<std::string> requested) {
    Turn turn;
    turn.system_text = system;
    turn.transcript_text = join(user);
    Words decoded = user;
    // Confidence noise occasionally decorates the decoded stream with a
    // hesitation token; the slot-bearing words themselves are never touched.
    if (rng->uniform() < noise) decoded.insert(decoded.begin(), "uh");
    turn.asr_text = join(decoded);
    turn.asr_score = noise == 0.0 ? 1.0 : 1.0 - noise * rng->uniform();
    turn.gold = state;
    turn.gold.requested = std::move(requested);
    dialog.turns.push_back(std::move(turn));
  }
};

std::vector<std::string> sample_request(Rng& rng) {
  const auto slots = std::vector<std::string>{"area", "food", "pricerange", "addr",
                                              "phone", "postcode", "name", "signature"};
  std::vector<std::string> picked;
  picked.push_back(slots[rng.uniform_index(slots.size())]);
  if (rng.uniform() < 0.4) {
    auto second = slots[rng.uniform_index(slots.size())];
    if (second != picked[0]) picked.push_back(second);
  }
  return picked;
}

Words request_words(const std::vector<std::string>& slots, Rng& rng) {
  Words words = rng.uniform() < 0.5 ? Words{"whats", "the"} : Words{"can", "i", "get", "the"};
  words.push_back(synth_request_keyword(slots[0]));
  if (slots.size() > 1) {
    words += Words{"and", "the", synth_request_keyword(slots[1])};
  }
  return words;
}

void gen_byname_dialog(Builder& b, Rng& rng) {
  const auto& name = kNames[rng.uniform_index(kNames.size())];
  b.state.goal.name = name;
  b.state.method = "byname";
  Words opener = rng.uniform() < 0.5 ? Words{"im", "looking", "for", name}
                                     : Words{"do", "you", "have", name};
  b.add_turn("hello how may i help you", opener, {});

  auto req = sample_request(rng);
  auto req_words = request_words(req, rng);
  b.add_turn(name + " is a nice restaurant", req_words, std::move(req));

  b.state.method = "finished";
  b.add_turn("can i help with anything else", {"thank", "you", "good", "bye"}, {});
}

void gen_byconstraints_dialog(Builder& b, Rng& rng) {
  // Per-slot plan: a concrete value, "dontcare", or never mentioned.
  std::array<std::string, 4> plan = {"none", "none", "none", "none"};
  auto sample_slot = [&](std::size_t slot, const std::vector<std::string>& lexicon) {
    double u = rng.uniform();
    if (u < 0.70) {
      plan[slot] = lexicon[rng.uniform_index(lexicon.size())];
    } else if (u < 0.85) {
      plan[slot] = "dontcare";
    }
  };
  sample_slot(kPrice, kPrices);
  sample_slot(kArea, kAreas);
  sample_slot(kFood, kFoods);
  if (plan[kPrice] == "none" && plan[kArea] == "none" && plan[kFood] == "none") {
    plan[kFood] = kFoods[rng.uniform_index(kFoods.size())];
  }

  std::vector<std::size_t> mentioned;
  for (std::size_t slot : {kPrice, kArea, kFood}) {
    if (plan[slot] != "none") mentioned.push_back(slot);
  }
  rng.shuffle(mentioned);

  // Opening turn states one or two constraints; the rest are answered when
  // the system asks.
  std::size_t stated = 1 + (mentioned.size() > 1 && rng.uniform() < 0.6 ? 1 : 0);
  b.state.method = "byconstraints";
  Words opener = {"im", "looking", "for"};
  // "im looking for in the west" reads badly; lead with a noun unless the
  // first fragment already carries one ("a cheap restaurant").
  if (!(mentioned[0] == kPrice && plan[mentioned[0]] != "dontcare")) {
    opener += Words{"a", "restaurant"};
  }
  for (std::size_t i = 0; i < stated; ++i) {
    std::size_t slot = mentioned[i];
    b.state.goal.slot(slot) = plan[slot];
    opener += constraint_fragment(slot, plan[slot], i == 0, rng);
  }
  b.add_turn("hello how may i help you", opener, {});

  for (std::size_t i = stated; i < mentioned.size(); ++i) {
    std::size_t slot = mentioned[i];
    b.state.goal.slot(slot) = plan[slot];
    b.add_turn(ask_line(slot), answer_fragment(slot, plan[slot], rng), {});
  }

  auto make_offer = [&rng]() {
    const auto& offer_name = kNames[rng.uniform_index(kNames.size())];
    return offer_name + (rng.uniform() < 0.5 ? " is a nice restaurant"
                                             : " matches your request");
  };
  std::string offer = make_offer();

  // Occasional revision of one concrete constraint after the first offer.
  std::vector<std::size_t> concrete;
  for (std::size_t slot : {kPrice, kArea, kFood}) {
    if (plan[slot] != "none" && plan[slot] != "dontcare") concrete.push_back(slot);
  }
  if (!concrete.empty() && rng.uniform() < 0.2) {
    std::size_t slot = concrete[rng.uniform_index(concrete.size())];
    const auto& lexicon = slot == kPrice ? kPrices : slot == kArea ? kAreas : kFoods;
    std::string next = lexicon[rng.uniform_index(lexicon.size())];
    while (next == plan[slot]) next = lexicon[rng.uniform_index(lexicon.size())];
    b.state.goal.slot(slot) = next;
    Words words = {"actually"};
    switch (slot) {
      case kPrice: words += Words{"make", "it", next}; break;
      case kArea: words += Words{"in", "the", next}; break;
      default: words += Words{"i", "want", next, "food"}; break;
    }
    b.add_turn(offer, words, {});
    offer = make_offer();
  }

  auto req = sample_request(rng);
  auto req_words = request_words(req, rng);
  b.add_turn(offer, req_words, std::move(req));

  if (rng.uniform() < 0.25) {
    b.state.method = "byalternatives";
    Words alt = rng.uniform() < 0.5 ? Words{"is", "there", "anything", "else"}
                                    : Words{"how", "about", "another", "place"};
    b.add_turn("here is that information", alt, {});
    const auto& other = kNames[rng.uniform_index(kNames.size())];
    auto req2 = sample_request(rng);
    auto req2_words = request_words(req2, rng);
    b.add_turn(other + " is a nice restaurant", req2_words, std::move(req2));
  }

  b.state.method = "finished";
  Words bye = rng.uniform() < 0.5 ? Words{"thank", "you", "good", "bye"}
                                  : Words{"thats", "all", "good", "bye"};
  b.add_turn("can i help with anything else", bye, {});
}

}  // namespace

std::string synth_surface_form(std::string_view value) {
  if (value == "dontcare") return "any";
  return std::string(value);
}

std::string synth_request_keyword(std::string_view slot) {
  if (slot == "area") return "area";
  if (slot == "food") return "cuisine";
  if (slot == "pricerange") return "cost";
  if (slot == "addr") return "address";
  if (slot == "phone") return "phone";
  if (slot == "postcode") return "postcode";
  if (slot == "name") return "name";
  if (slot == "signature") return "signature";
  throw ValueError("no request keyword for slot: " + std::string(slot));
}

Corpus gen_synthetic_corpus(const SynthOptions& opts) {
  if (opts.n_dialogs < 1) throw ValueError("n_dialogs must be >= 1");
  if (opts.noise < 0.0 || opts.noise > 1.0) throw ValueError("noise must be in [0, 1]");
  Corpus corpus;
  corpus.mode = CorpusMode::kAsr;
  Rng rng(opts.seed);
  for (int i = 0; i < opts.n_dialogs; ++i) {
    Builder b;
    b.noise = opts.noise;
    b.rng = &rng;
    std::ostringstream id;
    id << "synth-" << opts.seed << "-" << i;
    b.dialog.id = id.str();
    if (rng.uniform() < 0.15) {
      gen_byname_dialog(b, rng);
    } else {
      gen_byconstraints_dialog(b, rng);
    }
    corpus.dialogs.push_back(std::move(b.dialog));
  }
  apply_mode(corpus, CorpusMode::kAsr);
  return corpus;
}

}  // namespace itrack
