// Seeded normal samples (n = 50 each), rounded to 4 decimals, with reference
// results from an independent statistics package (median-centred Levene,
// Student and Welch t-tests).

// sd 1
pub const SPREAD_1: [f64; 50] = [
    -0.327, -0.9743, 0.4946, 0.425, -0.4412, -0.0997, -1.8037, -0.8824, 0.2166, 0.5955,
    -0.009, -0.8228, -0.3551, 0.5253, -1.3667, 1.2048, -0.2286, -0.805, -1.0395, -1.1292,
    0.763, -1.3548, -0.8425, 0.1019, -1.2129, -1.1554, 1.6878, -0.1449, -0.3736, 2.1488,
    0.9965, 0.5764, 0.8678, 0.5677, 0.1311, -2.3378, 0.6501, -0.1391, 1.5219, 0.9977,
    1.3579, -0.4024, 0.4557, 1.314, -0.9971, -0.135, -0.5412, 0.1989, -0.0813, -0.3489,
];

// sd 4
pub const SPREAD_4: [f64; 50] = [
    3.3299, 2.0667, 3.3062, 2.6351, -5.2617, 0.7008, -2.8078, 6.2543, -0.3106, 4.4692,
    2.6687, 0.4949, -5.3847, -1.1207, 1.5819, 3.8188, 6.9714, 1.8892, 8.3612, -1.4646,
    1.2144, -1.4035, -2.7677, -6.7936, -7.5751, 5.4824, -6.4218, -3.4332, -5.1946, 0.0151,
    -5.7374, -5.4534, 1.5087, 0.601, -1.6281, 4.7677, 5.5663, 1.5194, -2.9913, 2.6687,
    1.7445, 8.9591, 1.6154, 3.4728, -0.3553, 9.2041, -0.0408, 7.1841, 9.8285, -3.2694,
];

// sd 1, mean 0
pub const EQUAL_A: [f64; 50] = [
    -1.2137, -0.8972, -0.9474, -0.1755, -1.5377, 0.6756, 0.3312, -1.1095, -0.3548, 2.199,
    0.0965, 0.3137, 0.3838, -1.5715, 0.9198, 1.2538, -1.9639, 0.6382, -0.9634, 0.0125,
    -0.5262, -0.3073, -2.4426, -1.5258, 0.101, -1.1185, 0.2329, -0.8312, -0.3023, 0.7126,
    0.9832, -0.4051, 2.1029, 0.001, 0.4715, -0.4425, -0.8903, 2.4828, -1.8671, -1.2439,
    0.9249, -1.6384, 0.0161, -0.5932, -2.1707, 1.2142, 1.3826, -0.9323, -0.2918, -0.5283,
];

// sd 1, mean 0.3
pub const EQUAL_B: [f64; 50] = [
    0.5614, -0.4003, 0.6027, 1.164, 0.3479, -0.4608, 0.8295, 0.9422, -0.2918, -0.2941,
    -0.3659, -0.7295, 2.3379, 1.2041, -1.6468, -0.2392, -0.0399, -1.5118, 1.2558, 1.2947,
    0.5546, 1.1335, 0.1319, 0.9104, 0.07, -0.5696, 3.0821, -0.5208, -1.8365, 1.2527,
    1.3898, 1.1413, 0.9055, -0.848, -1.1146, 1.0936, 1.0188, 0.2594, 0.7213, 1.186,
    -1.1855, 1.4082, 0.0614, 1.3923, -0.5188, 0.8613, 1.8344, -0.8312, 1.3215, -1.1922,
];

pub const LEVENE_SPREAD: (f64, f64) = (51.16018776115908, 1.551324672673321e-10);
pub const LEVENE_EQUAL: (f64, f64) = (0.01111734059933314, 0.9162431439351718);
pub const WELCH_SPREAD: (f64, f64, f64) = (-1.4591651091427376, 0.15037483790502548, 53.42316616286519);
pub const STUDENT_EQUAL: (f64, f64) = (-2.646958617351724, 0.009464393624517257);
