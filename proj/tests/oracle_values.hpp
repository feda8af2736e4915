#pragma once
// Generated by tests/oracles/derive_oracles.py. Do not edit by hand.

namespace oracle {

inline constexpr double kNeuronLoss = 2.0;
inline constexpr double kNeuronGrad[] = {4.0, 4.0};
inline constexpr double kNeuronSgdParams[] = {0.96, 0.96};
inline constexpr double kNeuronSamEpsilon[] = {0.07071067811865475, 0.07071067811865475};
inline constexpr double kNeuronSamOuterGrad[] = {4.909942350986232, 4.909942350986232};
inline constexpr double kNeuronSamParams[] = {0.9509005764901377, 0.9509005764901377};
inline constexpr double kNeuronModelGradNorm = 2.8284271247461903;
inline constexpr double kNeuronRegComponent = 0.00565685424949238;
inline constexpr double kNeuronEffectiveLr = 0.011414213562373095;
inline constexpr double kTanhNetW[] = {-0.21118912055729136, -0.5177334709845255, 0.1495958369624623, -1.7898968436779759, 0.2844522535691842, -0.3216956064836901, -0.726050324449302, 0.09853727513129668, -1.9514738484064804, -0.15841288562715672, -0.7312848653804448, 0.40969535789355127};
inline constexpr double kTanhNetA[] = {0.44244173776631784, -0.9278626907702291, -0.9331679527718499, -1.4700371639889616};
inline constexpr double kTanhNetB1[] = {-0.7876892940867893, 0.3194143920162998, 0.8572703661247674, 0.22879972296310866};
inline constexpr double kTanhNetB2 = 0.03479925265515608;
inline constexpr double kTanhNetX[] = {-0.8674471104434567, 0.19577021284431775, -0.8156895315256701};
inline constexpr double kTanhNetY = 0.23962888489868106;
inline constexpr double kTanhNetLoss = 2.369623671671402;
inline constexpr double kTanhNetGrad[] = {0.4499298770274347, -0.10154263785102569, 0.4230841122109348, -0.08560435420305815, 0.01931965930944842, -0.0804966374730942, -0.014299323442522584, 0.0032271495981366373, -0.013446132103665088, -2.742036248466304, 0.6188377522113772, -2.5784283975474476, 1.478895279659788, -2.123136481189023, -2.1681307745939624, 0.24094438925741618, -0.5186827780167731, 0.0986853874690936, 0.016484374978449668, 3.1610414231070747, -2.1769812455193094};
inline constexpr double kMlpX[] = {-0.20259332624012352, 0.8560181034854327, 0.2024703525539789};
inline constexpr double kMlpW0[] = {1.3688252896097017, -0.4082144474715901, 0.7559450824466323, 0.22516072407457527, 1.6965558201068938, -1.9620539547190585, 0.8742582951813314, -1.0236516100709405, -0.8686467389750054, -0.018363115062379937, -1.5105593611064696, -1.1945810265785586, -0.5055418749192547, -0.32248383162699573, -1.9036789280897755};
inline constexpr double kMlpB0[] = {-0.8736312382373598, -0.14591356690623353, -0.13192758477062216, -0.6623081572224156, -0.004088789106296888};
inline constexpr double kMlpW1[] = {-0.5133744270857837, 1.173498778229933, -0.8091351820079116, 0.05910379879897925, -0.4895950062802856, 0.8545624531310859, -0.9715485115688727, 0.8766026328650387, -1.1953017929996643, -1.366996897121547, -0.5484695736103665, 0.09212685627119044, -1.5210236133299682, -0.5041894554335143, -0.003970465709318486, -0.03555765389596433, 0.8755659365466596, 0.7842735347855208, 0.3328312480926164, 0.9134330350514333};
inline constexpr double kMlpB1[] = {0.9397262079681602, -1.1091623712921952, 2.185262079056387, -0.04892698270045923};
inline constexpr double kMlpW2[] = {-0.6059423952504954, 0.600149321696642, -0.4885771515933718, 0.6271570321279208, -1.2013988771197082, 0.7253584703756797, -1.2638736463683906, 0.3757325601327688};
inline constexpr double kMlpB2[] = {-0.21322506082178258, -0.5014829692374623};
inline constexpr double kMlpOutput[] = {-1.467807345962817, -3.360092493070031};
inline constexpr double kLinearW[] = {0.153073453363695, -0.5753083988801887, -0.7719429461651369, 0.3949064774378438};
inline constexpr double kLinearA[] = {1.9312068474400939, -0.9977568753677936};
inline constexpr double kLinearX[] = {1.1551673162548703, 1.0815576939107636};
inline constexpr double kLinearY = 0.7;
inline constexpr double kLinearPenaltyGrad[] = {-7.968205637410791, -7.460455288628779, 3.865292014176565, 3.6189877070778578, 3.0741222398098866, 0.8429712464002058};

}  // namespace oracle
