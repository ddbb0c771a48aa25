// Generated by tools/derive_sbp_coefficients.py. Do not edit.
#pragma once

#include <array>

namespace hhsbp::detail {

// Interior order 2, boundary closure order 1.
struct Sbp2 {
  static constexpr int kHalfWidth = 1;
  static constexpr int kBlockRows = 1;
  static constexpr int kBlockCols = 2;
  // c_k for D u_i = (1/h) sum_k c_k (u_{i+k} - u_{i-k})
  static constexpr std::array<double, 1> interior{0.5000000000000000000000000000000000000000};
  // unit-spacing norm weights of the first block rows
  static constexpr std::array<double, 1> norm{0.5000000000000000000000000000000000000000};
  // strictly upper triangle of the skew block, row major (i < j < block rows)
  static constexpr std::array<double, 1> skew_upper{0.0};
};

// Interior order 4, boundary closure order 2.
struct Sbp4 {
  static constexpr int kHalfWidth = 2;
  static constexpr int kBlockRows = 4;
  static constexpr int kBlockCols = 6;
  // c_k for D u_i = (1/h) sum_k c_k (u_{i+k} - u_{i-k})
  static constexpr std::array<double, 2> interior{0.6666666666666666666666666666666666666667, -0.08333333333333333333333333333333333333333};
  // unit-spacing norm weights of the first block rows
  static constexpr std::array<double, 4> norm{0.3541666666666666666666666666666666666667, 1.229166666666666666666666666666666666667, 0.8958333333333333333333333333333333333333, 1.020833333333333333333333333333333333333};
  // strictly upper triangle of the skew block, row major (i < j < block rows)
  static constexpr std::array<double, 6> skew_upper{0.6145833333333333333333333333333333333333, -0.08333333333333333333333333333333333333333, -0.03125000000000000000000000000000000000000, 0.6145833333333333333333333333333333333333, 0, 0.6145833333333333333333333333333333333333};
};

// Interior order 6, boundary closure order 3.
struct Sbp6 {
  static constexpr int kHalfWidth = 3;
  static constexpr int kBlockRows = 6;
  static constexpr int kBlockCols = 9;
  // c_k for D u_i = (1/h) sum_k c_k (u_{i+k} - u_{i-k})
  static constexpr std::array<double, 3> interior{0.7500000000000000000000000000000000000000, -0.1500000000000000000000000000000000000000, 0.01666666666666666666666666666666666666667};
  // unit-spacing norm weights of the first block rows
  static constexpr std::array<double, 6> norm{0.3159490740740740740740740740740740740741, 1.390393518518518518518518518518518518519, 0.6275462962962962962962962962962962962963, 1.240509259259259259259259259259259259259, 0.9116898148148148148148148148148148148148, 1.013912037037037037037037037037037037037};
  // strictly upper triangle of the skew block, row major (i < j < block rows)
  static constexpr std::array<double, 15> skew_upper{0.6424593103820244268392593571788812676619, -0.04477165510834462093728434229577198422771, -0.1422117303004460315570364495193049866214, 0.03295211032375414449481442313632678120439, 0.01157196470301208116024701149986892198285, 0.3995545235733306881456799915418990963718, 0.3595522182854373891407387823483005726886, -0.09586497389926322704073927194641061470163, -0.02078245757748042340642014476490778669685, 0.3807448496157971787604957855529339952126, -0.01467617677629100592098961271342782237313, -0.01128580437452010563111052359337906069547, 0.6455421778943183424666676458628867506927, -0.06412350696019647278913619414762383607956, 0.7012864708758515873330865176727084281557};
};

// Interior order 8, boundary closure order 4.
struct Sbp8 {
  static constexpr int kHalfWidth = 4;
  static constexpr int kBlockRows = 8;
  static constexpr int kBlockCols = 12;
  // c_k for D u_i = (1/h) sum_k c_k (u_{i+k} - u_{i-k})
  static constexpr std::array<double, 4> interior{0.8000000000000000000000000000000000000000, -0.2000000000000000000000000000000000000000, 0.03809523809523809523809523809523809523810, -0.003571428571428571428571428571428571428571};
  // unit-spacing norm weights of the first block rows
  static constexpr std::array<double, 8> norm{0.2948906761778785588309397833207357016881, 1.525720623897707231040564373897707231041, 0.2574528769841269841269841269841269841270, 1.798113701499118165784832451499118165785, 0.4127080577601410934744268077601410934744, 1.278484623015873015873015873015873015873, 0.9232955798059964726631393298059964726631, 1.009333860859158478206097253716301335349};
  // strictly upper triangle of the skew block, row major (i < j < block rows)
  static constexpr std::array<double, 28> skew_upper{0.6648909043789702329003143303346349819829, -0.01807394424104579146040883422975550532589, -0.2221709862079295584584866904803046063230, 0.01272157449060385794665569497295382545440, 0.08544767534545956560921785365621442411687, -0.01424251057748347015523762448983996626130, -0.008572713188574836382054729763903153644036, 0.1615087188508803867423192995190065720925, 0.7221191684672281754713627360748634666128, -0.04960323718548093396460298918235106747296, -0.2277469272347449981740635635022484672637, 0.03679900465770256190652459110180105287290, 0.02181417682338504091877425632356342514147, 0.1380534403451216185389988132621744134997, 0.02865836415819051724803921124766305911680, -0.02975572727262851108333511078437411737634, 0.006404427124033792370627165298685314550234, 0.00007427025511717820758038626510239697621299, 0.2551072156887330970359347308121735275464, 0.4880116177800052184774909009748652385194, -0.07167327505185765753385479648744860254868, -0.03344393581246042242769597644285688972763, 0.3121327264058465998492296632175119166368, -0.08539265727603648837855065356301371906402, 0.02371527659366499822391906676736971850042, 0.7237859359206730247690571421466442188500, -0.1302203804205446739000412081084847480265, 0.7611571152732222391690420144830187745896};
};

}  // namespace hhsbp::detail
