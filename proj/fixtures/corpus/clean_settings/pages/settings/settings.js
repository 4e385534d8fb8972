Page({
  data: {
    theme: 'light',
    fontSize: 14
  },

  onLoad: function () {
    var saved = wx.getStorageSync('theme')
    if (saved) {
      this.setData({ theme: saved })
    }
  },

  toggleTheme: function () {
    var next = this.data.theme === 'light' ? 'dark' : 'light'
    this.setData({ theme: next })
    wx.setStorageSync('theme', next)
  },

  changeFont: function (e) {
    this.setData({ fontSize: e.detail.value })
  }
})
