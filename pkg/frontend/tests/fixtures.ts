/** PNG fixtures captured from the generation service's own encoders:
 * heightmaps are 16-bit grayscale integer meters, textures and sketches are
 * 8-bit RGB. The tiny images have hand-picked sample values for decoder
 * verification. */

export const fixtures = {
  /** 32x32 16-bit grayscale heightmap. */
  heightmap32:
    "iVBORw0KGgoAAAANSUhEUgAAACAAAAAgEAAAAAAGgflrAAAFGklEQVR4nEXTW2+b5QEA4Of198WJYyep4zRp2qalpGlToFRl" +
    "HYexDWmg7mKC3Uwg7WoXu98Vv2P7BZO220nTJHZSGWwaTBQBbWGEtoE2h6Y52k5sJ/ExfnexSXv+wxMyb+ua9LIr4apzhlU8" +
    "tqsb7/utm1ZknNJwM+6H43HHsqjpgRWf+H2shGOpR44paNvRkZEaMCgbt31h24YdGUFTXzdW1GUkUqcM2TCmYDC1Zsiwth0H" +
    "etraevrKNq1bjKtCKMaOinX09SXGHHPOjgvhGZdSOYfWPOm8utsO4iNVLctq2nHXp9rxn24qaKgrmHCkp2jAZW96oJIa0rIt" +
    "UYplDWtuqOkr2dPTU7OvI2vMgI5ESWIg5A3Gh67pa6We1lGwqCJvUFfQ1lWU6oexeAezOjYFF0yFkzI6cds3bmmqaqQuqmn4" +
    "XMNZM4raqqq6WhpOhBcMe8Fe/IduKDnpeW2L7nlHS96i1VRdYtCONYNKEmUPfKPmUHDKG0YN2g1viX5iXN96/MSvLVtWtaed" +
    "6ioIEmQM6Os4sGsp7ocZeXPG1JDDkBENu5qagoZHOtLUVQ3LzjphTN89C8qyZsNlz5u1Zc+41KEo6tpX1XJe0YRhHUkarsd1" +
    "WUVNNZtuu2VAyYwh86bV9Azr6DlQVlWxoWbOiyZNOBRD8kM1t+PHFv3LbW1lwTljsuZNOZCYsuqGdRtxy4CGLSUjeo7c8yB1" +
    "XV0xPBc/8rGKvpaMI1FGxoCCRKpr20pc8blUW9eQQphQiveE1NP2HEjDW/GXvvB+vGskzJpXsu+0SVkVK+qaRu15V8a4JFzS" +
    "jJ8py6WuaTtj02euezfe8JG9eMdcmDTsEFktjx3EmooN96VOOBGX9GwblE3Da/J68X074VL8RcjF91VV5JQV9Y3ru2XHTBiJ" +
    "71kS5J1Q8Qfz5pXCUEb4X9H/Rs4ryPq/IOjpSwQHuvJygo5dLUnIGU3jTUe2LIhaxnw/vB4XVcOMSUP6ahLTMnbigT9JXHJo" +
    "zTElHQ0ZxdSuA/etumXHrJ95NfzcstckOkYkgiA1FIrxL1INh7qCAYlEQmpMMOC+v8ddzfBT/fgbH1pXdSTq6VpRN6TkKV/6" +
    "UM6cSdNKRrQspWFKI9513jPhBUdecuRbqnIyHtlFz44jg3JGTXtC3iXTTjoRisb0Uxc1w/fiQ5fdtapnKxyPHygZtuiBPdQN" +
    "iuialXPMc2HaacF5BVJFx82FN30T3/NHd1XioY+11bVsx6/0dEyGi46MuurZMGTOFZMGRXlJKqfktNTJcDb+yo4t+zoqys5Y" +
    "9W91k/LG9cKQokET2vb0nfGE48ZTJZOOa8qYcsGWfpiNC54w7AOjZhw6GWZdEySyDtWQykl0bKmkzpiQs2hB1lUNOfXwqhkL" +
    "8W1D4ZJg1sumDLpqzecOtRXktS156HFq3rCybdseq0kMe963jTvtDVWXBaddNOXQIwvxjg0hzCtoWo8LHqdycjKCfKy77UDX" +
    "S85oKIQfx9/pSmTDrONx1Q1Hlm3Ixmq4ZjN+6St7qV0bFtUUwpNxzYQ1z4RTcVvf9fAjD2Wc8Yrh8HT8s6fCi3FNDOPG4j3v" +
    "+VozVbbiU0HRlfC6FSvOuhqm49e+o6KGZxUd2TThgh+EVzSMxCV/845NSeqePT05w1pGPaerrW4gfDfe0dDXd07dTQvK9lVV" +
    "VFRU1fW09FLr+jISiabUFRO+tOSsXJiLf7Wna8zXvooLNpStWYu7DvQMGFPW+A9S7E8JH2pybwAAAABJRU5ErkJggg==",
  heightmap32MinM: 242,
  heightmap32MaxM: 1213,
  /** 32x32 8-bit RGB texture paired with the heightmap above. */
  texture32:
    "iVBORw0KGgoAAAANSUhEUgAAACAAAAAgCAIAAAD8GO2jAAAIlklEQVR4nAXBR44lyWEA0PAmI/031UPOCCQEiIvZCFzwJLqD" +
    "9rwqtyRGGgjdVd+kD5Nh9R78+3//V6k49iR4IOiJrQcVb/+9f/yvQ+zRh2/T9J1LVevGqDnWHLxEPWofgS7+1fftE6MDiGb6" +
    "HcFffZNU2bTH5wFG9nnC+xJRn06OHMB6lE4enIbo920LMFKX4g3O6+V6ZakB9QFNKlnwdgZrRNTQPf30XhQufRdWXF1asJcF" +
    "Tltvi6qakMgYesY5mVmpt4aSUmpzVA+k7rRs+Z/PK2cHDQ9JhikwlSwyTFV2iRTADcqUZFU56kHO0xoIrCMGnb1n97uRlzpa" +
    "w45CZfJII4Fq12h9Rvs6s5IgRveFAZRgOynyFAbXZB25mW+GZ5HYCxfkNwL9bw5Z2doxoQFEgOxXMt/TWfUJ67HKmMgEnxXj" +
    "JDkikCDoC7ECHn3Bs8FXlILtQHzCnqKv7LGXnSpHjF5+QsWRHyX8uueeLGmFfdfv0nJKwRNh0L7qk7ndQlCchApTQh0g3e6o" +
    "EImVi9MWnnyTqCJvo/HNyCKE8z4sPkCfshjFRGSabZT1dc3PUsnmBIRgtys1+B1/1usYIuGIJoi7pxVI36x/187nAqDdKYFZ" +
    "HWKXxdBCOPhpn9mrvxYiT8ZOhCE29XNSuPbtvqOsWFFBQF9wj/ev3ecwoBHJSqkrDANeEDUIduTHT6YqnjqGWWKoVDmWCqOC" +
    "cDW9Ku7L5Ddk8uQhGSbXmbrKaEV+iKROgzwFyeJUa5CXoaLQYp32tKEVRmj77AmiTyNsL4YS0UuTfRJlTtX9e6F1xRaqtip2" +
    "4CB67G94OBdWftwEuqlDVU/x8UlLyuDdflyX2M/vkCpQPyiisXbwhP8omyEeYdt3T6dTC+T1ilgDcLpZU1BwmtNqrUveBlaK" +
    "sbHbALnRXx7nVLkBbgg+BomzJuTH+sXbua+TmGRGfoaC5DPwP1EpE0WRASwmeYKZbk9Ag701hvcaMga+c0KNo143zDXFHGrc" +
    "F24qNv6I9vuOaEpOb/0sTlxR27qoQXVOQve6ejWiOhMVKhbUk2lJ3EbBdQ+2A2nPhd2+5YQ5DRi3sboAZ8HSBNpbVVIt0zKO" +
    "vJMC1WmTEgyym1LBTjbYbWvHXAS51xXoywseiSOABtK0DOcaPTlEsoPPV5EbssV+oF1ufXSQD4LFtE3EsfxMYZyP2jR2za4q" +
    "7Tlp3gcCUDovEF2iZjuKRTxQKWRjDUTJhBv1RL59YBlfjvdGrxVI6x31JaGNPjlKczoriLH2kug7ls6wXEwvSZumVRYOIkSy" +
    "IXATcHHoD9fGuTyAQ6chhxd60+rpaEkNIK5DRd14v9uFZr+sqz1ke2W2ur0D0qjQLuo8Bd2Nz9j6NBErIjwHHNzoqLaRF4Ro" +
    "tWfPHHhE0HFTnxkB/RTbWwO12GuqrQbWR56T0JK8Ma+e8XVd1lYaJW9wjk7GLW3TbQX4uL0QGRpoSkQv9hnO+gxn4JkdXoPc" +
    "nFlkhQgkt5Ec9oQmc7SHGPq3/Oq2qwV7G38p1TEWefQnPBpLgGgJf43wHuEJiMQIGmOz96WDJX10ap9Rtc2MAqlQypQebJFU" +
    "oR3xWK5VWyBo9DsHqqVVG6BD6PbDyIxxXfLZowSKN8h0JsYlH0YnHdhQeqEkf6WCfyy1jFuiPerblVxyEWN/eJIZAt2HykHP" +
    "USoDrhyIj67E04XNkCuOZH/RHIksb072kNiFGXXcM+sa1jlSos9AgfTt42gb6N5pG3ZtfTEmFx5jNwaaUJ5/kI5wucJKMVeV" +
    "qLcMwbWx4Yi9KJaGyE9G5m8NJWUHS/HdV4bbYr4a4soGIoo5HwDEpP+tGpCgzhVvOAXnl4bPxRE/R5utJqiAeQDMIyK7w0/o" +
    "QscZeF5nZUyy7PZ8wT7a+YLMkr81DqGQ8lFzsm6sslWpyZMnZErpzMDH7STv0GQb7z0Zcb8100h7sIWZhqxOpyH6uUvLWnwR" +
    "IL7hVbQxu4LxUHJor3Q/NbWC/VHj34Mo93yK90BLbfgBoZ0EgLkBy9oIdtr5jcAHySjtM8SZoUrdQsSwqr48ZAMAKNaqxGfe" +
    "F9hD/7KEHHMUjHW08uY74mpw0AZ44P3zNgHAvwEspRoL6hqEIoA5EpSMvcRLVfZPlnt9bGZQAMyjM/MOogebhZyctxtcYsGE" +
    "yeuLRgMCnasRVwWU2JI8VtcWf8JClLZ/MGabRVifzRvnDEWLTqtjjPKXW5P2yRbS2bDJ664UPQuWsx2SkAOc5tgZgTE4fyml" +
    "yeZoIXLGgLUHc8r7b+kafh4X57q9cyga6b8ViNiBLSHK97h50y2mwK/y1CfX4wkcjY2ICV4bsE4yQEFxaSqQ13VV/I5UzTXJ" +
    "eGBi3TCrBFv3KjbU0i2vFwKmBu6HvClewIM86+Ne379ezqpAYHNA/AGshodETOVqPXaFsiE4tgJ7p1qSF+ozji2pQjV5JyR3" +
    "xWXYRvgVERe3rEt1j3sE8hGOFtzRr3/5q+wVotuQSuTvO/QbtZ4nEvaNvPiNzE1dFKqWJZ3la6IMbScPFGrX74NgZjkRQFAa" +
    "wBTJNCYFSgoJncLUsiHFoOdv/7f89hSCWH02EWtDnFExkYTq9nG16aRkilumZ3Qh3AlsSo8pC4HD7GzaaUM7QDEt5dRZhW5K" +
    "3VLrBOsTncubXgxa9wdkIPry01/+U//8RyXSh6GExhIOPU6Nrck6DMHzUd2BnDjzcE/klOjECSTte3P4lDpPJAVCtFMNv4ZI" +
    "UjTAk6zeKKNkpHXLtz//+kafDaPoz3/LwyxOckYBtnaP0IVASO+9ew6nio/cMKU9Eq1ZS1VfTdMgiOczpUTrjG6HkY85MFhR" +
    "/wnj/1iFmnHB1X/AigmnR664+NcJYbDEce5yxsl/YIgk3EoFi9CwDyRPnSVLTmkw8XlgxMmjlgkEGV4gSErqD05Vbi5/avWw" +
    "wv8HjuLE0RnZcWYAAAAASUVORK5CYII=",
  /** 32x32 sketch extracted from the same heightmap (binary channels). */
  sketch32:
    "iVBORw0KGgoAAAANSUhEUgAAACAAAAAgCAIAAAD8GO2jAAABDUlEQVR4nLVV2xaDMAgrnv3/L7OHOUtJuNSjPM0Qkw6Byngi" +
    "NMClzcxTmOPkTCLJsoRe8BGT1fISdazDH9MBWWW8CxekMvXYl3m4VPGHkBn67NsPW5kVqU7RNiCET+NE2+qdOuLxyw9wErT3" +
    "qXaLc6nbx2ZH1AZOPWRQQqfumbqsVIog0xlk88iPU+DqUh2F8AXAfb5ohwPSiUc/pgIa4LiPfHkFCqGB9WAXye72SkOX0qvF" +
    "6e8QVNRYeL5tAtrMTs5v2bnel+DiUfcceNixIEx9oIl4zJl/w4EMp6/mvaBt+guBJXMn5Hy96G67xbpX7vpui7d1zfnB2V6K" +
    "FTNbuYlWE7/ZGv0r761RIvEFcE2VoBP+KgUAAAAASUVORK5CYII=",
  /** 2x2 16-bit grayscale, row-major samples [0, 483, 1093, 65535]. */
  tinyGray16:
    "iVBORw0KGgoAAAANSUhEUgAAAAIAAAACEAAAAAAHTY67AAAAEklEQVR4nGNgYGB8zMDi+v8/AAk/AyxfOwGfAAAAAElFTkSu" +
    "QmCC",
  /** 3x2 8-bit RGB: pure red, green, blue / black, white, (12, 34, 56). */
  tinyRgb:
    "iVBORw0KGgoAAAANSUhEUgAAAAMAAAACCAIAAAASFvFNAAAAFklEQVR4nGP4z8DAAMMM////51GyAAA8eAZhLwBbjwAAAABJ" +
    "RU5ErkJggg==",
} as const;
