#include "bilo/portfolio_file.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bilo/error.hpp"

namespace bilo {
namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& tok, std::size_t line_no) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || !std::isfinite(v))
    throw ConfigError("portfolio line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  return v;
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Portfolio parse_portfolio(std::string_view text) {
  std::vector<TransferSpec> transfers;
  std::vector<ClassifierSpec> classifiers;
  ConfigSpace* current = nullptr;

  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    auto where = [&] { return "portfolio line " + std::to_string(line_no) + ": "; };

    if (tok[0] == "transfer") {
      if (tok.size() < 2 || tok.size() > 3) throw ConfigError(where() + "expected 'transfer <id> [needs-target]'");
      bool needs = false;
      if (tok.size() == 3) {
        if (tok[2] != "needs-target") throw ConfigError(where() + "unknown transfer flag '" + tok[2] + "'");
        needs = true;
      }
      transfers.push_back({tok[1], {}, needs});
      current = &transfers.back().space;
      continue;
    }
    if (tok[0] == "classifier") {
      if (tok.size() != 2) throw ConfigError(where() + "expected 'classifier <id>'");
      classifiers.push_back({tok[1], {}});
      current = &classifiers.back().space;
      continue;
    }
    if (current == nullptr) throw ConfigError(where() + "parameter before any learner header");
    if (tok.size() < 3) throw ConfigError(where() + "expected 'name kind ...'");

    const std::string& name = tok[0];
    const std::string& kind = tok[1];
    try {
      if (kind == "cat") {
        if (tok.size() != 3) throw ConfigError(where() + "categorical choices must be one comma-separated token");
        current->add(ParamSpec::categorical(name, split_commas(tok[2])));
      } else if (kind == "int" || kind == "real") {
        if (tok.size() != 4) throw ConfigError(where() + "expected 'name " + kind + " lower upper'");
        ParamSpec spec = kind == "int" ? ParamSpec::integer(name, 0, 0) : ParamSpec::real(name, 0, 0);
        spec.lower = parse_number(tok[2], line_no);
        if (auto sym = parse_bound_symbol(tok[3])) {
          spec.upper_symbol = *sym;
          spec.upper = spec.lower;
        } else {
          spec.upper = parse_number(tok[3], line_no);
        }
        current->add(std::move(spec));
      } else {
        throw ConfigError(where() + "unknown parameter kind '" + kind + "'");
      }
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      if (msg.rfind("portfolio line", 0) == 0) throw;
      throw ConfigError(where() + msg);
    }
  }
  return Portfolio(std::move(transfers), std::move(classifiers));
}

Portfolio load_portfolio(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open portfolio file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_portfolio(buf.str());
}

std::string format_portfolio(const Portfolio& portfolio) {
  std::ostringstream os;
  auto write_space = [&os](const ConfigSpace& space) {
    for (const auto& p : space.params()) {
      os << "  " << p.name << ' ' << to_string(p.kind) << ' ';
      if (p.kind == ParamKind::categorical) {
        for (std::size_t i = 0; i < p.choices.size(); ++i) os << (i ? "," : "") << p.choices[i];
      } else {
        os << fmt_number(p.lower) << ' ';
        if (p.upper_symbol)
          os << to_string(*p.upper_symbol);
        else
          os << fmt_number(p.upper);
      }
      os << '\n';
    }
  };
  for (const auto& t : portfolio.transfers()) {
    os << "transfer " << t.id << (t.needs_target_data ? " needs-target" : "") << '\n';
    write_space(t.space);
  }
  for (const auto& c : portfolio.classifiers()) {
    os << "classifier " << c.id << '\n';
    write_space(c.space);
  }
  return os.str();
}

std::string_view default_portfolio_text() {
  return R"(# Natively implemented transfer learners and classifiers.
transfer identity
transfer NNfilter needs-target
  k int 1 100
  metric cat Euc,Man,Che,Min,Mah
transfer TD needs-target
  strategy cat NN,EM
  k int 1 N_s
transfer PCAmining needs-target
  dime int 5 max(N_s,N_t)

classifier NB
  NBType cat gauss,multi,comp
  alpha real 0 10
  norm cat true,false
classifier LR
  penalty cat L1,L2
  fit_int cat true,false
  tol real 1e-6 0.1
classifier KNN
  n_neigh int 1 50
  p int 1 5
classifier DT
  max_e int 10 100
  criterion cat gini,entropy
  min_s_l int 1 20
  splitter cat auto,sqrt,log2
  min_a_p int 2 N_s/10
classifier Bagging
  n_est int 10 200
  max_s real 0.7 1.0
  max_f real 0.7 1.0
)";
}

std::string_view full_portfolio_text() {
  return R"(# All 13 transfer learners and 16 classifiers with their parameter ranges.
transfer NNfilter needs-target
  k int 1 100
  metric cat Euc,Man,Che,Min,Mah
transfer CDE_SMOTE needs-target
  k int 1 100
  metric cat Euc,Man,Che,Min,Mah
transfer FSS_bagging needs-target
  topN int 1 15
  threshold real 0.3 0.7
  ratio real 0.1 0.5
transfer TCA+ needs-target
  kernel cat primal,rbf,linear,sam
  dime int 5 max(N_s,N_t)
  lamb real 1e-7 100
  gama real 1e-6 100
transfer GIS needs-target
  prob real 0.02 0.1
  chrm_size real 0.02 0.1
  pop_size int 2 30
  num_parts int 2 6
  num_gens int 5 20
  mcount int 3 10
transfer CLIFE_MORPH
  n int 1 100
  alpha real 0.05 0.2
  beta real 0.2 0.4
  per real 0.6 0.9
transfer HISNN needs-target
  minham int 1 N_s
transfer MCWs needs-target
  k int 2 N_s
  sigma real 0.01 10
  lambda real 1e-7 100
transfer FeSCH needs-target
  nt int 1 N_s
  strategy cat SFD,LDF,FCR
transfer UM needs-target
  p real 0.01 0.1
  qua_T cat cli,cohen
transfer TD needs-target
  strategy cat NN,EM
  k int 1 N_s
transfer VCB needs-target
  m int 2 30
  lambda real 0.5 1.5
transfer PCAmining needs-target
  dime int 5 max(N_s,N_t)

classifier EXs
  max_e int 10 100
  criterion cat gini,entropy
  min_s_l int 1 20
  splitter cat random,best
  min_a_p int 2 N_s/10
classifier EXtree
  max_e int 10 100
  criterion cat gini,entropy
  min_s_l int 1 20
  splitter cat random,best
  min_a_p int 2 N_s/10
classifier DT
  max_e int 10 100
  criterion cat gini,entropy
  min_s_l int 1 20
  splitter cat auto,sqrt,log2
  min_a_p int 2 N_s/10
classifier RF
  m_stim int 10 100
  criterion cat gini,entropy
  splitter cat auto,sqrt,log2
  min_s_l int 1 20
  min_a_p int 2 N_s/10
classifier SVM
  C real 0.001 10
  kernel cat rbf,lin,poly,sig
  degree int 1 5
  coef0 real 0 10
  gamma real 0.01 100
classifier MLP
  active cat iden,log,tanh,relu
  hid_l_s int 50 200
  solver cat lbfgs,sgd,adam
  iter int 100 250
classifier PAC
  C real 0.001 100
  fit_int cat true,false
  tol real 1e-6 0.1
  loss cat hinge,s_hinge
classifier Perceptron
  penalty cat L1,L2
  alpha real 1e-6 0.1
  fit_int cat true,false
  tol real 1e-6 0.1
classifier NB
  NBType cat gauss,multi,comp
  alpha real 0 10
  norm cat true,false
classifier Ridge
  alpha real 1e-5 1000
  fit_int cat true,false
  tol real 1e-6 0.1
classifier Bagging
  n_est int 10 200
  max_s real 0.7 1.0
  max_f real 0.7 1.0
classifier LR
  penalty cat L1,L2
  fit_int cat true,false
  tol real 1e-6 0.1
classifier KNN
  n_neigh int 1 50
  p int 1 5
classifier RNC
  radius real 0 10000
  weight cat uni,dist
classifier NCC
  metric cat Euc,Man,Che,Min,Mah
  shrink_t real 0 10
classifier adaBoost
  n_est int 10 1000
  rate real 0.01 10
)";
}

}  // namespace bilo
