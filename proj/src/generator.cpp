#include "dta/generator.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "dta/api.hpp"
#include "dta/error.hpp"
#include "dta/random.hpp"
#include "dta/text.hpp"

namespace dta {

namespace {

// Staff segment templates, one row of paraphrases per template. The first
// 30 are the roles used by the dialogue flows below; the remaining ones
// answer one-off questions. Earlier paraphrases are used more often.
constexpr std::array<std::array<const char*, GeneratorConfig::kMaxVariants>, GeneratorConfig::kMaxTemplates> kTemplates = {{
    {"This is the bike rental after-sale service desk.", "You have reached the bike rental after-sale service desk.", "Welcome to the bike rental after-sale service desk.", "Hi, this is the after-sale service desk for bike rental.", "Thanks for calling the bike rental after-sale service desk."},
    {"I am really sorry for the inconvenience.", "I am really sorry for all the inconvenience caused.", "Really sorry for the inconvenience this brought you.", "We are truly sorry for the inconvenience.", "So sorry for the inconvenience, my apologies."},
    {"Let me check the status of your order.", "Let me quickly check the status of your order.", "Allow me to check the current status of your order.", "I will check the status of your order now.", "Give me a moment to check the status of your order."},
    {"Your bike is still shown as unlocked in our system.", "Our system still shows your bike as unlocked.", "In our system your bike is still shown as unlocked.", "Your bike still appears unlocked in our system.", "The system still has your bike shown as unlocked."},
    {"I can lock the bike remotely for you.", "I am able to lock the bike remotely for you.", "We can lock the bike remotely on your behalf.", "I can remotely lock the bike for you from here.", "It is possible for me to lock the bike remotely."},
    {"The bike has now been locked successfully.", "Your bike has now been locked successfully.", "The bike has been locked successfully just now.", "Good news, the bike is now locked successfully.", "The bike was locked successfully a moment ago."},
    {"The fee kept running because the ride was not ended.", "The fee kept running since the ride was never ended.", "Because the ride was not ended the fee kept running.", "Your fee kept running as the ride had not ended.", "The riding fee kept running while the ride was not ended."},
    {"The extra riding fee has been reduced by half.", "Your extra riding fee has been reduced by half.", "I have reduced the extra riding fee by half.", "The extra riding fee is now reduced by half.", "We reduced your extra riding fee by half."},
    {"The full fee cannot be waived according to our rules.", "According to our rules the full fee cannot be waived.", "Sadly the full fee cannot be waived under our rules.", "Our rules say the full fee cannot be waived.", "The full fee can not be waived, those are our rules."},
    {"We hope you can understand our situation.", "We really hope you can understand our situation.", "Hopefully you can understand our situation.", "We hope you understand our situation here.", "I hope you can understand our situation."},
    {"Is there anything else I can help you with?", "Is there anything else I could help you with?", "Anything else I can help you with today?", "Is there anything else that I can help with?", "Is there something else I can help you with?"},
    {"You are very welcome.", "You are very welcome, happy to help.", "You are most welcome.", "You are very welcome indeed.", "Very welcome, glad to help."},
    {"Have a nice day and goodbye.", "Have a nice day, goodbye.", "Goodbye and have a nice day.", "Have a really nice day and goodbye.", "Goodbye now, have a nice day."},
    {"Please upload a photo of the parking spot.", "Please upload a clear photo of the parking spot.", "Could you upload a photo of the parking spot?", "Kindly upload a photo of your parking spot.", "Please upload one photo showing the parking spot."},
    {"We have received your parking photo.", "We have now received your parking photo.", "Thanks, we have received your parking photo.", "Your parking photo has been received.", "We received the parking photo you sent."},
    {"Your order shows the bike is already locked.", "Your order already shows the bike is locked.", "The order shows the bike is already locked.", "Your order shows that the bike is locked already.", "I see your order shows the bike already locked."},
    {"I will look into the refund for you.", "I will look into this refund for you right away.", "Let me look into the refund for you.", "I will personally look into the refund for you.", "We will look into the refund for you."},
    {"The refund has been issued to your original payment method.", "Your refund has been issued to the original payment method.", "The refund was issued to your original payment method today.", "We have issued the refund to your original payment method.", "The refund has just been issued to your original payment method."},
    {"The money should arrive within three working days.", "The money should arrive in your account within three working days.", "Usually the money should arrive within three working days.", "Your money should arrive within three working days.", "The money should normally arrive within three working days."},
    {"Could you tell me your order number?", "Could you please tell me your order number?", "Can you tell me your order number?", "Could you tell me the order number please?", "Would you tell me your order number?"},
    {"Thank you for waiting patiently.", "Thank you so much for waiting patiently.", "Thanks for waiting so patiently.", "Thank you for waiting patiently for me.", "Many thanks for waiting patiently."},
    {"Please remember to lock the bike after every ride.", "Please always remember to lock the bike after every ride.", "Remember to lock the bike after every ride please.", "Please do remember to lock your bike after every ride.", "Just remember to lock the bike after every single ride."},
    {"Bikes must be parked inside the marked service area.", "All bikes must be parked inside the marked service area.", "Bikes must always be parked inside the marked service area.", "Bikes must be parked only inside the marked service area.", "Please note bikes must be parked inside the marked service area."},
    {"A dispatch fee applies when parking outside the area.", "A dispatch fee applies when parking outside that area.", "When parking outside the area a dispatch fee applies.", "A dispatch fee always applies when parking outside the area.", "Note that a dispatch fee applies when parking outside the area."},
    {"We have recorded the fault of this bike.", "We have recorded the fault of this bike for repair.", "We have now recorded the fault of this bike.", "I have recorded the fault of this bike.", "The fault of this bike has been recorded."},
    {"You will not be charged for the faulty ride.", "You will not be charged anything for the faulty ride.", "Do not worry, you will not be charged for the faulty ride.", "You will certainly not be charged for the faulty ride.", "Of course you will not be charged for the faulty ride."},
    {"A riding coupon has been added to your account.", "A free riding coupon has been added to your account.", "We have added a riding coupon to your account.", "A riding coupon has just been added to your account.", "As compensation a riding coupon has been added to your account."},
    {"I will forward your case to a senior specialist.", "I will forward your case to a senior specialist immediately.", "Let me forward your case to a senior specialist.", "Your case will be forwarded to a senior specialist.", "I am going to forward your case to a senior specialist."},
    {"Our specialist will call you back within one hour.", "Our specialist will call you back within the next hour.", "A specialist will call you back within one hour.", "Our specialist will surely call you back within one hour.", "Expect our specialist to call you back within one hour."},
    {"Would you like me to lock it now?", "Would you like me to lock it for you now?", "Would you like me to lock it right now?", "Do you want me to lock it now?", "Would you like that I lock it now?"},
    {"Our service hours are from eight to ten every day.", "Our service hours are from eight am to ten pm every day.", "Every day our service hours are from eight to ten.", "Our service hours run from eight to ten every day.", "The service hours are from eight to ten every single day."},
    {"The deposit can be withdrawn from the wallet page.", "Your deposit can be withdrawn from the wallet page.", "The deposit can be withdrawn on the wallet page anytime.", "You can withdraw the deposit from the wallet page.", "The deposit can easily be withdrawn from the wallet page."},
    {"The monthly riding card renews automatically.", "Your monthly riding card renews automatically.", "The monthly riding card renews automatically each month.", "The monthly riding card always renews automatically.", "Note the monthly riding card renews automatically."},
    {"Invoices can be requested in the order details page.", "Invoices can be requested on the order details page.", "You can request invoices in the order details page.", "Invoices can easily be requested in the order details page.", "Any invoice can be requested in the order details page."},
    {"The helmet is stored in the basket under the seat.", "The helmet is stored in the small basket under the seat.", "Your helmet is stored in the basket under the seat.", "The helmet is always stored in the basket under the seat.", "You will find the helmet stored in the basket under the seat."},
    {"The battery range is about forty kilometres.", "The battery range is roughly forty kilometres.", "The battery range is about forty kilometres per charge.", "A full battery range is about forty kilometres.", "Its battery range is about forty kilometres."},
    {"You can change your phone number in the settings.", "You can change your phone number in the app settings.", "You can easily change your phone number in the settings.", "Your phone number can be changed in the settings.", "You may change your phone number in the settings."},
    {"Student discounts require an identity check.", "Student discounts require a quick identity check.", "All student discounts require an identity check.", "Student discounts first require an identity check.", "Note that student discounts require an identity check."},
    {"The app update fixes the scanning problem.", "The latest app update fixes the scanning problem.", "The new app update fixes the scanning problem.", "Installing the app update fixes the scanning problem.", "The app update should fix the scanning problem."},
    {"Lost items are kept at the nearest service station.", "Lost items are kept safely at the nearest service station.", "All lost items are kept at the nearest service station.", "Lost items are usually kept at the nearest service station.", "Any lost items are kept at the nearest service station."},
}};

enum Role : std::size_t {
  kGreet, kSorry, kChecking, kUnlocked, kOfferLock, kLockedDone, kFeeExplain, kFeeReduced,
  kNotWaived, kUnderstand, kAskElse, kWelcome, kGoodbye, kAskPhoto, kPhotoOk, kAlreadyLocked,
  kRefundLook, kRefundDone, kRefundTime, kAskOrder, kThanksWait, kRemindLock, kParkingRule,
  kDispatchFee, kFaultRecorded, kNoCharge, kCoupon, kEscalate, kCallback, kConfirmLock,
  kFirstExtra,
};

using Paraphrases = std::vector<const char*>;

const Paraphrases kHello = {"hello", "hi there", "hello, anyone there", "hi, I need help", "good morning"};
const Paraphrases kForgotLock = {"I forgot to lock my bike after the ride", "my bike is not locked and the fee keeps going up",
                                 "I did not lock the bike, can you help me", "help, I forgot to lock the bike",
                                 "I left the bike unlocked by mistake"};
const Paraphrases kLockedButCharged = {"I locked the bike but the fee is still running", "the bike is locked yet I am still charged",
                                       "I already locked it, why is the fee still counting", "the ride should be over, I locked the bike"};
const Paraphrases kYesLock = {"yes please lock it", "yes, go ahead", "please do that", "ok, lock it for me", "sure, lock it"};
const Paraphrases kAskReduce = {"can you reduce the fee", "the fee is too high, please reduce it", "please lower the charge for me",
                                "can I get the extra fee removed", "is it possible to cut the fee"};
const Paraphrases kWaiveAll = {"I want the whole fee waived", "please cancel the entire charge", "I should not pay anything",
                               "I refuse to pay any of it"};
const Paraphrases kThanks = {"thanks", "thank you so much", "great, thanks", "ok thank you", "thanks a lot"};
const Paraphrases kBye = {"no, that is all", "nothing else, bye", "that's it, bye", "no more questions", "all good now"};
const Paraphrases kRefund = {"when will I get my refund", "I want my refund for the ride", "where is my refund",
                            "my refund has not arrived", "please check my refund"};
const Paraphrases kOrderNumber = {"my order number is", "the order number is", "here is my order number", "order number"};
const Paraphrases kDispatch = {"why was I charged a dispatch fee", "I got an extra parking charge", "what is this parking fee",
                               "why do I have to pay for parking", "there is a dispatch charge on my bill"};
const Paraphrases kPhotoSent = {"I have uploaded the photo", "photo sent", "I just sent the picture", "the photo is uploaded now",
                                "here is the photo of my parking"};
const Paraphrases kFault = {"the bike was broken during my ride", "the brakes did not work", "the bike chain fell off",
                            "the motor stopped working", "the bike had a flat tire"};
const Paraphrases kAngry = {"this is unacceptable", "I am very angry about this service", "I want to complain",
                            "your service is terrible", "I want to talk to a manager"};
const std::array<const char*, GeneratorConfig::kMaxTemplates - kFirstExtra> kMiscQuestions = {
    "what are your service hours", "how do I get my deposit back", "does the riding card renew",
    "how can I get an invoice", "where is the helmet", "how far can the bike go",
    "how do I change my phone number", "is there a student discount", "the app cannot scan the code",
    "I lost my bag on the bike"};

std::string make_variant(std::size_t template_id, std::size_t variant) { return kTemplates[template_id][variant]; }

class DialogueBuilder {
 public:
  DialogueBuilder(const GeneratorConfig& config, Rng& rng, std::string id, OrderRecord order)
      : config_(config), rng_(rng), executor_(std::move(order)) {
    dialogue_.id = std::move(id);
  }

  void user(const Paraphrases& options, const std::string& suffix = "") {
    std::string text = options[rng_.below(options.size())];
    dialogue_.turns.push_back({Speaker::user, text + suffix, std::nullopt, std::nullopt});
  }

  void user_text(std::string text) {
    dialogue_.turns.push_back({Speaker::user, std::move(text), std::nullopt, std::nullopt});
  }

  void api(const char* name) {
    Turn turn{Speaker::staff, "", ApiCall{name, executor_.default_args()}, std::nullopt};
    turn.api_result = executor_.execute(name, turn.api_call->args);
    gold_.push_back({dialogue_.id, dialogue_.turns.size(), {}, name});
    dialogue_.turns.push_back(std::move(turn));
  }

  void staff(std::initializer_list<std::size_t> roles) {
    std::vector<std::string> parts;
    GoldTurn gold{dialogue_.id, dialogue_.turns.size(), {}, ""};
    for (std::size_t role : roles) {
      std::size_t tid = role % config_.template_count;
      parts.push_back(make_variant(tid, sample_variant()));
      gold.templates.push_back(tid);
    }
    dialogue_.turns.push_back({Speaker::staff, join(parts, " "), std::nullopt, std::nullopt});
    gold_.push_back(std::move(gold));
  }

  const OrderRecord& order() const { return executor_.order(); }
  void set_locked(bool locked) {
    OrderRecord order = executor_.order();
    order.locked = locked;
    executor_ = MockApiExecutor(order);
  }
  Dialogue take(std::vector<GoldTurn>& gold_out) {
    for (auto& g : gold_) gold_out.push_back(std::move(g));
    return std::move(dialogue_);
  }

 private:
  // variant v drawn with weight 1/(v+1)
  std::size_t sample_variant() {
    double total = 0.0;
    for (std::size_t v = 0; v < config_.variants; ++v) total += 1.0 / static_cast<double>(v + 1);
    double r = rng_.uniform() * total;
    for (std::size_t v = 0; v < config_.variants; ++v) {
      r -= 1.0 / static_cast<double>(v + 1);
      if (r < 0.0) return v;
    }
    return config_.variants - 1;
  }

  const GeneratorConfig& config_;
  Rng& rng_;
  MockApiExecutor executor_;
  Dialogue dialogue_;
  std::vector<GoldTurn> gold_;
};

void lock_scenario(DialogueBuilder& b, bool fee_first, Rng& rng) {
  if (fee_first) {
    b.user(kAskReduce);
    b.api("check_order_status");
    b.staff({kChecking, kUnlocked, kOfferLock});
  } else {
    b.user(kForgotLock);
    b.api("check_order_status");
    b.staff({kSorry, kUnlocked, kConfirmLock});
  }
  b.user(kYesLock);
  b.api("lock_bike");
  b.staff({kLockedDone, kFeeExplain});
  if (fee_first || rng.chance(0.4)) {
    b.user(kAskReduce);
    b.api("reduce_fee");
    b.staff({kFeeReduced, kRemindLock});
  }
}

void generate_one(DialogueBuilder& b, const GeneratorConfig& config, Rng& rng) {
  if (rng.chance(0.1)) {
    b.user(kHello);
    b.staff({kGreet});
  }
  double pick = rng.uniform();
  const bool has_extras = config.template_count > kFirstExtra;
  if (has_extras && pick < 0.08) {
    std::size_t k = rng.below(config.template_count - kFirstExtra);
    b.user_text(kMiscQuestions[k]);
    b.staff({kFirstExtra + k, kAskElse});
  } else if (pick < 0.36) {
    lock_scenario(b, false, rng);
  } else if (pick < 0.44) {
    lock_scenario(b, true, rng);
  } else if (pick < 0.52) {
    b.set_locked(true);
    b.user(kLockedButCharged);
    b.api("check_order_status");
    b.staff({kAlreadyLocked, kFeeExplain});
    if (rng.chance(0.6)) {
      b.user(kAskReduce);
      b.api("reduce_fee");
      b.staff({kFeeReduced, kUnderstand});
    }
  } else if (pick < 0.64) {
    b.user(kWaiveAll);
    b.staff({kSorry, kNotWaived, kUnderstand});
    if (rng.chance(0.5)) {
      b.user(kAngry);
      b.staff({kSorry, kEscalate, kCallback, kUnderstand});
    }
  } else if (pick < 0.78) {
    b.user(kRefund);
    b.staff({kRefundLook, kAskOrder});
    b.user(kOrderNumber, " " + b.order().order_id);
    b.api("query_refund");
    b.staff({kThanksWait, kRefundDone, kRefundTime, kAskElse});
  } else if (pick < 0.90) {
    b.user(kDispatch);
    b.staff({kParkingRule, kDispatchFee, kAskPhoto});
    b.user(kPhotoSent);
    b.api("reduce_fee");
    b.staff({kPhotoOk, kFeeReduced});
  } else {
    b.user(kFault);
    b.staff({kSorry, kFaultRecorded, kNoCharge});
    if (rng.chance(0.5)) {
      b.user(kAngry);
      b.staff({kSorry, kCoupon, kNoCharge, kUnderstand});
    }
  }
  double close = rng.uniform();
  if (close < 0.3) {
    b.user(kThanks);
    b.staff({kWelcome, kAskElse});
    if (rng.chance(0.4)) {
      b.user(kBye);
      b.staff({kGoodbye});
    }
  } else if (close < 0.42) {
    b.user(kBye);
    b.staff({kGoodbye});
  }
}

}  // namespace

GeneratorConfig parse_generator_config(std::istream& in) {
  GeneratorConfig config;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(number, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::size_t parsed = 0;
    try {
      std::size_t used = 0;
      long long v = std::stoll(value, &used);
      if (used != value.size() || v < 0) throw std::invalid_argument(value);
      parsed = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ParseError(number, "value for '" + key + "' is not a non-negative integer");
    }
    if (key == "dialogs") {
      config.dialog_count = parsed;
    } else if (key == "templates") {
      config.template_count = parsed;
    } else if (key == "variants") {
      config.variants = parsed;
    } else {
      throw ParseError(number, "unknown key '" + key + "'");
    }
  }
  return config;
}

GeneratorConfig load_generator_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open generator config " + path.string());
  return parse_generator_config(in);
}

std::unordered_map<std::string, std::size_t> SyntheticCorpus::label_index() const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < catalogue.size(); ++i) index.emplace(catalogue[i], catalogue_label[i]);
  return index;
}

SyntheticCorpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  if (config.dialog_count < 1) throw Error("dialog count must be at least 1");
  if (config.template_count < 1 || config.template_count > GeneratorConfig::kMaxTemplates)
    throw Error("template count must be in [1, " + std::to_string(GeneratorConfig::kMaxTemplates) + "]");
  if (config.variants < 1 || config.variants > GeneratorConfig::kMaxVariants)
    throw Error("variants must be in [1, " + std::to_string(GeneratorConfig::kMaxVariants) + "]");

  SyntheticCorpus corpus;
  for (std::size_t t = 0; t < config.template_count; ++t) {
    for (std::size_t v = 0; v < config.variants; ++v) {
      corpus.catalogue.push_back(make_variant(t, v));
      corpus.catalogue_label.push_back(t);
    }
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < config.dialog_count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    char order_id[16];
    std::snprintf(order_id, sizeof order_id, "BK%06llu", static_cast<unsigned long long>(rng.below(1000000)));
    OrderRecord order{order_id, false, 500 + static_cast<int>(rng.below(2500)), false, false};
    DialogueBuilder builder(config, rng, id, order);
    generate_one(builder, config, rng);
    corpus.dialogues.push_back(builder.take(corpus.gold));
  }
  return corpus;
}

std::string gold_label(std::size_t template_id) { return "T" + std::to_string(template_id); }

void write_gold(std::ostream& out, const std::vector<GoldTurn>& gold) {
  for (const auto& g : gold) {
    out << g.dialogue_id << '\t' << g.turn_index << '\t';
    if (!g.api.empty()) {
      out << "API:" << g.api;
    } else {
      for (std::size_t k = 0; k < g.templates.size(); ++k) out << (k ? " " : "") << gold_label(g.templates[k]);
    }
    out << '\n';
  }
}

std::vector<GoldTurn> read_gold(std::istream& in) {
  std::vector<GoldTurn> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string id, turn, labels;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, turn, '\t') || !std::getline(fields, labels))
      throw ParseError(number, "expected id<TAB>turn<TAB>labels");
    GoldTurn g;
    g.dialogue_id = id;
    try {
      g.turn_index = std::stoul(turn);
    } catch (const std::exception&) {
      throw ParseError(number, "bad turn index");
    }
    if (labels.rfind("API:", 0) == 0) {
      g.api = labels.substr(4);
    } else {
      for (const auto& tok : split_whitespace(labels)) {
        if (tok.size() < 2 || tok[0] != 'T') throw ParseError(number, "bad gold label '" + tok + "'");
        g.templates.push_back(std::stoul(tok.substr(1)));
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace dta
